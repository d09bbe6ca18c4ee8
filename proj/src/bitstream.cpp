#include "deepcmc/bitstream.hpp"

#include <fstream>

namespace deepcmc {

std::vector<uint8_t> write_frame(const BitstreamFrame& f) {
    ByteWriter w;
    w.magic("CMC1");
    w.u8(BitstreamFrame::kVersion);
    w.u16(f.lambda_id);
    w.u16(f.n_c);
    w.u16(f.n_t);
    w.u32(static_cast<uint32_t>(f.payload.size()));
    w.bytes(f.payload.data(), f.payload.size());
    w.u32(f.checksum);
    return w.take();
}

BitstreamFrame read_frame(const uint8_t* data, size_t size) {
    ByteReader r(data, size);
    r.expect_magic("CMC1", "bitstream");
    const uint8_t version = r.u8();
    if (version != BitstreamFrame::kVersion) {
        throw IoError("unsupported bitstream version " + std::to_string(version));
    }
    BitstreamFrame f;
    f.lambda_id = r.u16();
    f.n_c = r.u16();
    f.n_t = r.u16();
    const uint32_t len = r.u32();
    f.payload.resize(len);
    r.bytes(f.payload.data(), len);
    f.checksum = r.u32();
    return f;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace deepcmc
