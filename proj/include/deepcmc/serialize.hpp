#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepcmc {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian byte composition shared by the dataset, checkpoint and
// bitstream containers.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }

    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v & 0xFF));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
    }

    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    }

    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }

    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u32(bits);
    }

    void bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }

    void magic(const char tag[4]) {
        buf_.insert(buf_.end(), tag, tag + 4);
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size) : p_(data), end_(data + size) {}
    explicit ByteReader(const std::vector<uint8_t>& buf) : ByteReader(buf.data(), buf.size()) {}

    uint8_t u8() {
        need(1);
        return *p_++;
    }

    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(p_[0] | (p_[1] << 8));
        p_ += 2;
        return v;
    }

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(p_[i]) << (8 * i);
        }
        p_ += 4;
        return v;
    }

    int32_t i32() { return static_cast<int32_t>(u32()); }

    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    void bytes(uint8_t* dst, size_t n) {
        need(n);
        std::memcpy(dst, p_, n);
        p_ += n;
    }

    void expect_magic(const char tag[4], const char* what) {
        need(4);
        if (std::memcmp(p_, tag, 4) != 0) {
            throw IoError(std::string("bad magic for ") + what);
        }
        p_ += 4;
    }

    size_t remaining() const { return static_cast<size_t>(end_ - p_); }
    const uint8_t* cursor() const { return p_; }
    void skip(size_t n) {
        need(n);
        p_ += n;
    }

private:
    void need(size_t n) const {
        if (static_cast<size_t>(end_ - p_) < n) {
            throw IoError("truncated input: wanted " + std::to_string(n) + " bytes, have " +
                          std::to_string(end_ - p_));
        }
    }

    const uint8_t* p_;
    const uint8_t* end_;
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& data);

}  // namespace deepcmc
