#include "deepcmc/range_coder.hpp"

#include <array>

namespace deepcmc {

namespace {
constexpr uint32_t kTopValue = 1u << 24;
}

void RangeEncoder::shift_low() {
    if (static_cast<uint32_t>(low_ >> 32) != 0 || static_cast<uint32_t>(low_) < 0xFF000000u) {
        const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
        do {
            out_.push_back(static_cast<uint8_t>(cache_ + carry));
            cache_ = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq, uint32_t total_bits) {
    range_ >>= total_bits;
    low_ += static_cast<uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTopValue) {
        shift_low();
        range_ <<= 8;
    }
}

void RangeEncoder::finish() {
    // Any value in [low, low+range) terminates the stream; range >= 2^24
    // here, so rounding low up to clear its bottom 24 bits stays inside the
    // interval and guarantees three zero tail bytes, which are trimmed. The
    // decoder synthesizes them back at end of input.
    low_ = (low_ + 0xFFFFFFull) & ~0xFFFFFFull;
    for (int i = 0; i < 5; ++i) shift_low();
    for (int i = 0; i < kTrimmedTailBytes; ++i) {
        if (out_.empty() || out_.back() != 0) {
            throw CodecError("range coder flush invariant violated");
        }
        out_.pop_back();
    }
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size) : p_(data), end_(data + size) {
    next_byte();  // encoder's first shifted byte is always 0
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
    if (p_ == end_) {
        // the trimmed flush tail; anything beyond it is a real truncation
        if (synthesized_ >= kTrimmedTailBytes) {
            throw CodecError("entropy payload truncated");
        }
        ++synthesized_;
        return 0;
    }
    return *p_++;
}

uint32_t RangeDecoder::decode_target(uint32_t total_bits) {
    range_ >>= total_bits;
    const uint32_t v = code_ / range_;
    const uint32_t mask = (1u << total_bits) - 1;
    if (v > mask) throw CodecError("entropy payload corrupt: target out of range");
    return v;
}

void RangeDecoder::decode_update(uint32_t cum, uint32_t freq) {
    code_ -= cum * range_;
    range_ *= freq;
    while (range_ < kTopValue) {
        code_ = (code_ << 8) | next_byte();
        range_ <<= 8;
    }
}

namespace {

// escape payload: value recoded as two 16-bit halves at uniform frequency
void encode_raw32(RangeEncoder& enc, uint32_t v) {
    enc.encode(v >> 16, 1, 16);
    enc.encode(v & 0xFFFFu, 1, 16);
}

uint32_t decode_raw32(RangeDecoder& dec) {
    const uint32_t hi = dec.decode_target(16);
    dec.decode_update(hi, 1);
    const uint32_t lo = dec.decode_target(16);
    dec.decode_update(lo, 1);
    return (hi << 16) | lo;
}

}  // namespace

std::vector<uint8_t> entropy_encode(const std::vector<int32_t>& symbols,
                                    const FrequencyTables& tables, size_t plane) {
    if (!tables.finalized()) throw CodecError("entropy_encode: tables not finalized");
    if (plane == 0) throw CodecError("entropy_encode: empty channel plane");
    std::vector<uint8_t> out;
    if (symbols.empty()) return out;  // zero-length payload for the vacuous case
    RangeEncoder enc(out);
    const int channels = tables.channels();
    const int esc = tables.escape_index();
    for (size_t i = 0; i < symbols.size(); ++i) {
        const int ch = static_cast<int>((i / plane) % static_cast<size_t>(channels));
        const auto& cum = tables.cum[static_cast<size_t>(ch)];
        const auto& freq = tables.freq[static_cast<size_t>(ch)];
        const long k = symbols[i];
        if (k >= tables.k_min && k <= tables.k_max) {
            const size_t idx = static_cast<size_t>(k - tables.k_min);
            enc.encode(cum[idx], freq[idx], FrequencyTables::kTotalBits);
        } else {
            enc.encode(cum[static_cast<size_t>(esc)], freq[static_cast<size_t>(esc)],
                       FrequencyTables::kTotalBits);
            encode_raw32(enc, static_cast<uint32_t>(symbols[i]));
        }
    }
    enc.finish();
    return out;
}

std::vector<int32_t> entropy_decode(const uint8_t* payload, size_t payload_size,
                                    const FrequencyTables& tables, size_t count, size_t plane) {
    if (!tables.finalized()) throw CodecError("entropy_decode: tables not finalized");
    if (plane == 0) throw CodecError("entropy_decode: empty channel plane");
    std::vector<int32_t> out;
    if (count == 0) {
        if (payload_size != 0) throw CodecError("entropy_decode: payload for empty tensor");
        return out;
    }
    out.reserve(count);
    RangeDecoder dec(payload, payload_size);
    const int channels = tables.channels();
    const size_t esc = static_cast<size_t>(tables.escape_index());
    for (size_t i = 0; i < count; ++i) {
        const int ch = static_cast<int>((i / plane) % static_cast<size_t>(channels));
        const auto& cum = tables.cum[static_cast<size_t>(ch)];
        const auto& freq = tables.freq[static_cast<size_t>(ch)];
        const uint32_t target = dec.decode_target(FrequencyTables::kTotalBits);
        // binary search: greatest idx with cum[idx] <= target
        size_t lo = 0, hi = freq.size() - 1;
        while (lo < hi) {
            const size_t mid = (lo + hi + 1) / 2;
            if (cum[mid] <= target) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        dec.decode_update(cum[lo], freq[lo]);
        if (lo == esc) {
            out.push_back(static_cast<int32_t>(decode_raw32(dec)));
        } else {
            out.push_back(static_cast<int32_t>(tables.k_min + static_cast<long>(lo)));
        }
    }
    return out;
}

uint32_t crc32(const uint8_t* data, size_t size) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    for (size_t i = 0; i < size; ++i) {
        crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

uint32_t symbol_stream_checksum(const std::vector<int32_t>& symbols) {
    std::vector<uint8_t> bytes;
    bytes.reserve(symbols.size() * 4);
    for (int32_t s : symbols) {
        const uint32_t u = static_cast<uint32_t>(s);
        bytes.push_back(static_cast<uint8_t>(u));
        bytes.push_back(static_cast<uint8_t>(u >> 8));
        bytes.push_back(static_cast<uint8_t>(u >> 16));
        bytes.push_back(static_cast<uint8_t>(u >> 24));
    }
    return crc32(bytes.data(), bytes.size());
}

}  // namespace deepcmc
