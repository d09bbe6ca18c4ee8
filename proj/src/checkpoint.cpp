#include <cstring>

#include "deepcmc/pipeline.hpp"
#include "deepcmc/serialize.hpp"

namespace deepcmc {

namespace {
constexpr uint16_t kCheckpointVersion = 1;
}

std::vector<uint8_t> serialize_checkpoint(const Model<float>& m) {
    ByteWriter w;
    w.magic("CMCK");
    w.u16(kCheckpointVersion);

    // architecture block
    w.u16(static_cast<uint16_t>(m.cfg.hidden_channels));
    w.u16(static_cast<uint16_t>(m.cfg.latent_channels));
    w.u8(CodecConfig::kStages);
    for (int i = 0; i < CodecConfig::kStages; ++i) {
        w.u8(static_cast<uint8_t>(CodecConfig::kEncKernel[i]));
        w.u8(static_cast<uint8_t>(CodecConfig::kPool[i]));
    }
    w.u8(CodecConfig::kResidualKernel);
    w.u8(CodecConfig::kResidualBlocks);

    w.u16(static_cast<uint16_t>(m.lambda_id));
    w.f32(m.lambda);
    w.f32(m.sigma_norm);

    bool bn_ready = true;
    auto probe = [&](const nn::BatchNorm<float>& b) { bn_ready = bn_ready && b.updates > 0; };
    probe(m.enc.s1.bn);
    probe(m.enc.s2.bn);
    probe(m.dec.rb1.bn1);
    probe(m.dec.rb1.bn2);
    probe(m.dec.rb2.bn1);
    probe(m.dec.rb2.bn2);
    probe(m.dec.s1.bn);
    probe(m.dec.s2.bn);
    w.u8(bn_ready ? 1 : 0);

    // named parameter records
    std::vector<std::pair<std::string, const Tensor<float>*>> records;
    visit_model(const_cast<Model<float>&>(m), static_cast<ModelGrads<float>*>(nullptr),
                [&](const std::string& name, ParamKind, Tensor<float>& t, Tensor<float>*) {
                    records.emplace_back(name, &t);
                });
    w.u32(static_cast<uint32_t>(records.size()));
    for (const auto& [name, t] : records) {
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(reinterpret_cast<const uint8_t*>(name.data()), name.size());
        w.u8(static_cast<uint8_t>(t->rank()));
        for (int d = 0; d < t->rank(); ++d) w.u32(static_cast<uint32_t>(t->dim(d)));
        for (size_t i = 0; i < t->numel(); ++i) w.f32((*t)[i]);
    }

    // finalized frequency tables
    w.u8(m.tables.finalized() ? 1 : 0);
    if (m.tables.finalized()) {
        w.u16(static_cast<uint16_t>(m.tables.channels()));
        w.i32(m.tables.k_min);
        w.i32(m.tables.k_max);
        for (const auto& f : m.tables.freq) {
            for (uint32_t v : f) w.u32(v);
        }
    }
    return w.take();
}

Model<float> deserialize_checkpoint(const uint8_t* data, size_t size) {
    ByteReader r(data, size);
    r.expect_magic("CMCK", "checkpoint");
    const uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }

    CodecConfig cfg;
    cfg.hidden_channels = r.u16();
    cfg.latent_channels = r.u16();
    const uint8_t stages = r.u8();
    if (stages != CodecConfig::kStages) throw IoError("checkpoint stage count mismatch");
    for (int i = 0; i < CodecConfig::kStages; ++i) {
        if (r.u8() != CodecConfig::kEncKernel[i] || r.u8() != CodecConfig::kPool[i]) {
            throw IoError("checkpoint stage geometry mismatch");
        }
    }
    if (r.u8() != CodecConfig::kResidualKernel || r.u8() != CodecConfig::kResidualBlocks) {
        throw IoError("checkpoint residual geometry mismatch");
    }

    const uint16_t lambda_id = r.u16();
    Model<float> m = init_model<float>(cfg, lambda_id, 0);
    m.lambda = r.f32();
    m.sigma_norm = r.f32();
    const bool bn_ready = r.u8() != 0;

    const uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor<float>*>> slots;
    visit_model(m, static_cast<ModelGrads<float>*>(nullptr),
                [&](const std::string& name, ParamKind, Tensor<float>& t, Tensor<float>*) {
                    slots.emplace_back(name, &t);
                });
    if (count != slots.size()) {
        throw IoError("checkpoint parameter count " + std::to_string(count) +
                      " does not match architecture (" + std::to_string(slots.size()) + ")");
    }
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t len = r.u16();
        std::string name(len, '\0');
        r.bytes(reinterpret_cast<uint8_t*>(name.data()), len);
        if (name != slots[i].first) {
            throw IoError("checkpoint record '" + name + "' out of order, expected '" +
                          slots[i].first + "'");
        }
        const uint8_t rank = r.u8();
        std::vector<int> dims(rank);
        for (auto& d : dims) d = static_cast<int>(r.u32());
        Tensor<float>* slot = slots[i].second;
        if (dims != slot->shape()) {
            throw IoError("checkpoint record '" + name + "' has unexpected shape");
        }
        for (size_t j = 0; j < slot->numel(); ++j) (*slot)[j] = r.f32();
    }

    if (bn_ready) {
        auto mark = [](nn::BatchNorm<float>& b) { b.updates = 1; };
        mark(m.enc.s1.bn);
        mark(m.enc.s2.bn);
        mark(m.dec.rb1.bn1);
        mark(m.dec.rb1.bn2);
        mark(m.dec.rb2.bn1);
        mark(m.dec.rb2.bn2);
        mark(m.dec.s1.bn);
        mark(m.dec.s2.bn);
    }

    if (r.u8() != 0) {
        FrequencyTables t;
        const uint16_t channels = r.u16();
        if (channels != cfg.latent_channels) throw IoError("checkpoint table channel mismatch");
        t.k_min = r.i32();
        t.k_max = r.i32();
        if (t.k_max < t.k_min) throw IoError("checkpoint table has empty support");
        const size_t nsym = static_cast<size_t>(t.k_max - t.k_min + 1) + 1;
        t.freq.assign(channels, std::vector<uint32_t>(nsym));
        for (auto& f : t.freq) {
            for (auto& v : f) v = r.u32();
        }
        t.build_cum();  // validates the exact 2^16 sum
        m.prior.k_min = t.k_min;
        m.prior.k_max = t.k_max;
        m.tables = std::move(t);
    }
    if (r.remaining() != 0) throw IoError("trailing bytes after checkpoint payload");
    return m;
}

void save_checkpoint(const Model<float>& m, const std::string& path) {
    write_file(path, serialize_checkpoint(m));
}

Model<float> load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> data = read_file(path);
    return deserialize_checkpoint(data.data(), data.size());
}

}  // namespace deepcmc
