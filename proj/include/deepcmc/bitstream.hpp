#pragma once

#include <cstdint>
#include <vector>

#include "deepcmc/serialize.hpp"

namespace deepcmc {

// Framed compressed CSI message. All fields little-endian:
//   magic "CMC1" | version u8 | lambda_id u16 | n_c u16 | n_t u16 |
//   payload_length u32 | payload | checksum u32
// The checksum is a CRC-32 over the quantized symbol stream (int32 LE each),
// so a decode with mismatched tables is detected.
struct BitstreamFrame {
    static constexpr uint8_t kVersion = 1;
    static constexpr size_t kFixedHeaderBits = 104;  // magic+version+nc+nt+length
    static constexpr size_t kLambdaBits = 16;
    static constexpr size_t kChecksumBits = 32;

    uint16_t lambda_id = 0;
    uint16_t n_c = 0;
    uint16_t n_t = 0;
    std::vector<uint8_t> payload;
    uint32_t checksum = 0;

    size_t payload_bits() const { return payload.size() * 8; }
    // on-wire accounting identity: wire_bits = 16 + 8*payload + 32 + fixed header
    size_t wire_bits() const {
        return kLambdaBits + payload_bits() + kChecksumBits + kFixedHeaderBits;
    }
};

std::vector<uint8_t> write_frame(const BitstreamFrame& f);
BitstreamFrame read_frame(const uint8_t* data, size_t size);

}  // namespace deepcmc
