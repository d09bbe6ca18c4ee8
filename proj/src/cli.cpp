#include "deepcmc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepcmc/pipeline.hpp"

namespace deepcmc {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

struct GenArgs {
    ChannelGenConfig cfg;
    int count = 0;
    double aod_min_deg = -60.0, aod_max_deg = 60.0;
    std::string out;
};

struct TrainArgs {
    std::string data, out;
    int lambda_id = -1;
    double lambda = 0;
    TrainConfig cfg;
    uint64_t seed = 1;
    bool quiet = false;
};

struct CodecArgs {
    std::string model, data, in, out;
    int index = 0;
    std::string pad = "zero";
};

struct EvalArgs {
    std::string model, data, ref, rec;
    int limit = 0;
    std::string pad = "zero";
};

struct SweepArgs {
    std::string models, data, out;
    int limit = 0;
};

int resolve_lambda_id(int lambda_id, double lambda) {
    if (lambda_id >= 0) {
        lambda_from_id(lambda_id);  // range check
        return lambda_id;
    }
    if (lambda <= 0) {
        throw CLI::ValidationError("--lambda-id or --lambda is required");
    }
    const int id = nearest_lambda_id(lambda);
    if (std::abs(lambda - kLambdaTable[static_cast<size_t>(id)]) >
        1e-9 * kLambdaTable[static_cast<size_t>(id)]) {
        std::fprintf(stderr, "warning: lambda %g resolved to nearest table entry %g (id %d)\n",
                     lambda, kLambdaTable[static_cast<size_t>(id)], id);
    }
    return id;
}

ChannelMatrix load_sample(const std::string& path, int index) {
    Dataset ds = read_dataset(path);
    if (index < 0 || static_cast<size_t>(index) >= ds.samples.size()) {
        throw std::invalid_argument("sample index " + std::to_string(index) +
                                    " out of range (dataset has " +
                                    std::to_string(ds.samples.size()) + " samples)");
    }
    return ds.samples[static_cast<size_t>(index)];
}

std::pair<ChannelMatrix, PaddingRecord> apply_pad_policy(const ChannelMatrix& h,
                                                         const std::string& policy) {
    if (h.n_c % 16 == 0 && h.n_t % 16 == 0) return {h, PaddingRecord{}};
    if (policy == "reject") {
        check_dims_multiple_of_16(h.n_c, h.n_t);  // throws with the required padding
    }
    return pad_to_16(h);
}

int cmd_gen(const GenArgs& a) {
    ChannelGenConfig cfg = a.cfg;
    cfg.aod_min_rad = a.aod_min_deg * kDegToRad;
    cfg.aod_max_rad = a.aod_max_deg * kDegToRad;
    Dataset ds = generate_dataset(cfg, a.count);
    write_dataset(ds, a.out);
    std::printf("wrote %d samples (%dx%d) to %s\n", a.count, cfg.n_c, cfg.n_t, a.out.c_str());
    return 0;
}

int cmd_train(const TrainArgs& a) {
    Dataset data = read_dataset(a.data);
    const int id = resolve_lambda_id(a.lambda_id, a.lambda);
    TrainConfig cfg = a.cfg;
    cfg.verbose = false;
    TrainResult r = train(data, id, cfg, a.seed);
    if (!a.quiet) {
        for (size_t e = 0; e < r.history.size(); ++e) {
            std::printf("epoch %3zu  rate %.5f  mse %.6f  total %.5f\n", e + 1,
                        r.history[e].rate, r.history[e].mse, r.history[e].total);
        }
    }
    save_checkpoint(r.model, a.out);
    std::printf("saved checkpoint (lambda=%g, sigma=%g) to %s\n",
                static_cast<double>(r.model.lambda), static_cast<double>(r.model.sigma_norm),
                a.out.c_str());
    return 0;
}

int cmd_compress(const CodecArgs& a) {
    Model<float> m = load_checkpoint(a.model);
    ChannelMatrix h = load_sample(a.data, a.index);
    auto [padded, rec] = apply_pad_policy(h, a.pad);
    CompressResult c = compress(m, padded);
    write_file(a.out, c.frame);
    std::printf("compressed %dx%d: payload %zu bytes, bit rate %.6f (payload-only %.6f)\n",
                padded.n_c, padded.n_t, c.payload_bytes, c.bit_rate, c.bit_rate_payload_only);
    return 0;
}

int cmd_decompress(const CodecArgs& a) {
    Model<float> m = load_checkpoint(a.model);
    const std::vector<uint8_t> frame = read_file(a.in);
    DecompressResult d = decompress(m, frame.data(), frame.size());
    Dataset out;
    out.n_c = d.reconstruction.n_c;
    out.n_t = d.reconstruction.n_t;
    out.samples.push_back(d.reconstruction);
    write_dataset(out, a.out);
    std::printf("decompressed %dx%d (lambda id %u) to %s\n", out.n_c, out.n_t, d.lambda_id,
                a.out.c_str());
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    if (!a.ref.empty() || !a.rec.empty()) {
        if (a.ref.empty() || a.rec.empty()) {
            throw CLI::ValidationError("--ref and --rec must be given together");
        }
        Dataset ref = read_dataset(a.ref);
        Dataset rec = read_dataset(a.rec);
        const size_t n = std::min(ref.samples.size(), rec.samples.size());
        if (n == 0) throw std::invalid_argument("eval: empty dataset");
        std::vector<double> ratios;
        double rho = 0;
        for (size_t i = 0; i < n; ++i) {
            PaddingRecord pr{ref.samples[i].n_c, ref.samples[i].n_t};
            ChannelMatrix cropped = crop_padding(rec.samples[i], pr);
            ratios.push_back(nmse_ratio(ref.samples[i], cropped));
            rho += cosine_corr(ref.samples[i], cropped);
        }
        std::printf("samples %zu  NMSE %.4f dB  rho %.4f\n", n, nmse_db_mean(ratios),
                    rho / static_cast<double>(n));
        return 0;
    }
    if (a.model.empty() || a.data.empty()) {
        throw CLI::ValidationError("eval needs --model and --data (or --ref/--rec)");
    }
    Model<float> m = load_checkpoint(a.model);
    Dataset data = read_dataset(a.data);
    size_t n = data.samples.size();
    if (a.limit > 0) n = std::min(n, static_cast<size_t>(a.limit));
    if (n == 0) throw std::invalid_argument("eval: empty dataset");
    std::vector<double> ratios;
    double rho = 0, rate = 0, rate_payload = 0;
    for (size_t i = 0; i < n; ++i) {
        auto [padded, rec] = apply_pad_policy(data.samples[i], a.pad);
        CompressResult c = compress(m, padded);
        DecompressResult d = decompress(m, c.frame.data(), c.frame.size());
        ChannelMatrix cropped = crop_padding(d.reconstruction, rec);
        ratios.push_back(nmse_ratio(data.samples[i], cropped));
        rho += cosine_corr(data.samples[i], cropped);
        rate += c.bit_rate;
        rate_payload += c.bit_rate_payload_only;
    }
    const double dn = static_cast<double>(n);
    std::printf("samples %zu  NMSE %.4f dB  rho %.4f  bit rate %.6f (payload-only %.6f)\n", n,
                nmse_db_mean(ratios), rho / dn, rate / dn, rate_payload / dn);
    return 0;
}

int cmd_sweep(const SweepArgs& a) {
    std::vector<Model<float>> models;
    std::stringstream ss(a.models);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) models.push_back(load_checkpoint(item));
    }
    if (models.empty()) throw std::invalid_argument("sweep: no checkpoints given");
    Dataset data = read_dataset(a.data);
    if (a.limit > 0 && static_cast<size_t>(a.limit) < data.samples.size()) {
        data.samples.resize(static_cast<size_t>(a.limit));
    }
    std::vector<const Model<float>*> refs;
    for (const auto& m : models) refs.push_back(&m);
    std::vector<RdPoint> points = rd_sweep(refs, data);
    const std::string csv = rd_csv(points);
    write_file(a.out, std::vector<uint8_t>(csv.begin(), csv.end()));
    std::printf("%s", csv.c_str());
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"DeepCMC: convolutional compression for massive MIMO CSI feedback"};
    app.require_subcommand(1);

    GenArgs gen;
    gen.cfg.n_c = 64;
    gen.cfg.n_t = 16;
    auto* g = app.add_subcommand("gen", "generate a synthetic CSI dataset");
    g->add_option("--nc", gen.cfg.n_c, "subcarrier count")->capture_default_str();
    g->add_option("--nt", gen.cfg.n_t, "transmit antenna count")->capture_default_str();
    g->add_option("--count", gen.count, "sample count")->required();
    g->add_option("--paths", gen.cfg.paths, "multipath component count L")->capture_default_str();
    g->add_option("--fs", gen.cfg.sample_rate_hz, "sampling rate in Hz")->capture_default_str();
    g->add_option("--delay-spread", gen.cfg.delay_spread_s, "max path delay in seconds")
        ->capture_default_str();
    g->add_option("--power", gen.cfg.avg_power_gain, "average power gain sigma_alpha^2")
        ->capture_default_str();
    g->add_option("--spacing", gen.cfg.spacing_over_lambda, "antenna spacing over wavelength")
        ->capture_default_str();
    g->add_option("--aod-min-deg", gen.aod_min_deg, "AoD range lower bound, degrees")
        ->capture_default_str();
    g->add_option("--aod-max-deg", gen.aod_max_deg, "AoD range upper bound, degrees")
        ->capture_default_str();
    g->add_option("--seed", gen.cfg.seed, "RNG seed")->capture_default_str();
    g->add_option("-o,--out", gen.out, "output .csid path")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train a checkpoint with the joint rate-distortion loss");
    t->add_option("--data", tr.data, "training dataset (.csid)")->required();
    t->add_option("--lambda-id", tr.lambda_id, "trade-off id into the shared lambda table");
    t->add_option("--lambda", tr.lambda, "trade-off value; resolved to the nearest table entry");
    t->add_option("--epochs", tr.cfg.epochs, "training epochs")->capture_default_str();
    t->add_option("--batch", tr.cfg.batch_size, "batch size")->capture_default_str();
    t->add_option("--lr", tr.cfg.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--hidden", tr.cfg.arch.hidden_channels, "hidden conv width")
        ->capture_default_str();
    t->add_option("--latent", tr.cfg.arch.latent_channels, "latent feature channels")
        ->capture_default_str();
    t->add_option("--seed", tr.seed, "RNG seed")->capture_default_str();
    t->add_flag("--quiet", tr.quiet, "suppress the per-epoch history lines");
    t->add_option("-o,--out", tr.out, "output checkpoint (.cmck)")->required();

    CodecArgs co;
    auto* c = app.add_subcommand("compress", "compress one dataset sample to a bitstream");
    c->add_option("--model", co.model, "checkpoint (.cmck)")->required();
    c->add_option("--data", co.data, "dataset (.csid)")->required();
    c->add_option("--index", co.index, "sample index")->capture_default_str();
    c->add_option("--pad", co.pad, "pad policy for non-multiple-of-16 dims: zero|reject")
        ->check(CLI::IsMember({"zero", "reject"}))
        ->capture_default_str();
    c->add_option("-o,--out", co.out, "output bitstream (.cmc)")->required();

    CodecArgs de;
    auto* d = app.add_subcommand("decompress", "reconstruct a channel matrix from a bitstream");
    d->add_option("--model", de.model, "checkpoint (.cmck)")->required();
    d->add_option("-i,--in", de.in, "input bitstream (.cmc)")->required();
    d->add_option("-o,--out", de.out, "output .csid with the single reconstruction")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "report NMSE / cosine correlation / bit rate");
    e->add_option("--model", ev.model, "checkpoint; runs compress+decompress per sample");
    e->add_option("--data", ev.data, "reference dataset (.csid)");
    e->add_option("--ref", ev.ref, "reference dataset for file-vs-file metrics");
    e->add_option("--rec", ev.rec, "reconstruction dataset for file-vs-file metrics");
    e->add_option("--limit", ev.limit, "evaluate at most this many samples (0 = all)")
        ->capture_default_str();
    e->add_option("--pad", ev.pad, "pad policy: zero|reject")
        ->check(CLI::IsMember({"zero", "reject"}))
        ->capture_default_str();

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "rate-distortion sweep over checkpoints, CSV output");
    s->add_option("--models", sw.models, "comma-separated checkpoint paths")->required();
    s->add_option("--data", sw.data, "test dataset (.csid)")->required();
    s->add_option("--limit", sw.limit, "evaluate at most this many samples (0 = all)")
        ->capture_default_str();
    s->add_option("-o,--out", sw.out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
        if (g->parsed()) return cmd_gen(gen);
        if (t->parsed()) return cmd_train(tr);
        if (c->parsed()) return cmd_compress(co);
        if (d->parsed()) return cmd_decompress(de);
        if (e->parsed()) return cmd_eval(ev);
        if (s->parsed()) return cmd_sweep(sw);
        return 2;
    } catch (const CLI::CallForHelp& h) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& pe) {
        std::cerr << pe.what() << "\n" << app.help() << std::flush;
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}

}  // namespace deepcmc
