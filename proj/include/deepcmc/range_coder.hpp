#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "deepcmc/entropy_model.hpp"

namespace deepcmc {

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Byte-wise renormalizing range coder with carry propagation, 32-bit range
// and 16-bit cumulative frequencies. Encoder and decoder must share the
// frequency tables bit-exactly. Constant stream overhead is at most
// kCoderOverheadBytes beyond the ideal codelength (leading byte plus the
// trimmed flush).
inline constexpr int kTrimmedTailBytes = 3;
inline constexpr int kCoderOverheadBytes = 4;

class RangeEncoder {
public:
    explicit RangeEncoder(std::vector<uint8_t>& out) : out_(out) {}

    // total implied as 1 << total_bits
    void encode(uint32_t cum, uint32_t freq, uint32_t total_bits);
    void finish();

private:
    void shift_low();

    std::vector<uint8_t>& out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t cache_size_ = 1;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t size);

    uint32_t decode_target(uint32_t total_bits);  // value in [0, 1<<total_bits)
    void decode_update(uint32_t cum, uint32_t freq);

private:
    uint8_t next_byte();

    const uint8_t* p_;
    const uint8_t* end_;
    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t code_ = 0;
    int synthesized_ = 0;
};

// Symbol layer over the range coder: codes integers with the per-channel
// tables; values outside [k_min, k_max] emit escape + 32-bit raw.
// channel_of(i) = (i / plane) % channels for a (C,h,w) tensor in row-major.
std::vector<uint8_t> entropy_encode(const std::vector<int32_t>& symbols,
                                    const FrequencyTables& tables, size_t plane);
std::vector<int32_t> entropy_decode(const uint8_t* payload, size_t payload_size,
                                    const FrequencyTables& tables, size_t count, size_t plane);

uint32_t crc32(const uint8_t* data, size_t size);
uint32_t symbol_stream_checksum(const std::vector<int32_t>& symbols);

}  // namespace deepcmc
