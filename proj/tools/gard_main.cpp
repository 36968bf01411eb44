// Command-line front end: simulate | train | denoise | evaluate | schedule-dump.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include "gard/corpus.hpp"
#include "gard/diffusion.hpp"
#include "gard/fidelity.hpp"
#include "gard/image_io.hpp"
#include "gard/metrics.hpp"
#include "gard/run_config.hpp"

namespace fs = std::filesystem;
using namespace gard;

namespace {

void write_run_json(const RunConfig& cfg, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    save_run_config(cfg, (dir / "run.json").string());
}

std::string fmt_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& cfg) {
    CorpusManifest m;
    m.count = cfg.corpus_count;
    m.seed = cfg.seed;
    m.phantom = cfg.phantom;
    m.speckle = cfg.speckle;
    if (cfg.corpus_dir.empty()) throw config_error("simulate: --corpus is required");

    write_corpus(cfg.corpus_dir, m, cfg.force, [&](int done, int total) {
        if (done % 50 == 0 || done == total)
            std::cout << "simulate: " << done << "/" << total << " samples\n";
    });
    write_run_json(cfg, cfg.corpus_dir);

    // summary statistics over the generated corpus
    double psnr_noisy = 0.0, psnr_avg = 0.0;
    for (int i = 0; i < m.count; ++i) {
        const PairedSample s = load_sample(cfg.corpus_dir, i);
        psnr_noisy += psnr(s.noisy, s.clean);
        psnr_avg += psnr(s.less_noisy, s.clean);
    }
    std::cout << "corpus: " << m.count << " samples, " << m.phantom.width << "x"
              << m.phantom.height << ", L=" << m.speckle.looks
              << ", avg_count=" << m.speckle.averaging_count << "\n"
              << "noisy vs clean mean PSNR: " << fmt_metric(psnr_noisy / m.count) << " dB\n"
              << "less-noisy vs clean mean PSNR: " << fmt_metric(psnr_avg / m.count) << " dB\n";
    return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg, bool resume) {
    if (cfg.corpus_dir.empty()) throw config_error("train: --corpus is required");
    if (cfg.checkpoint_path.empty()) throw config_error("train: --checkpoint is required");

    const std::vector<ImageField> dataset = load_clean_normalized(cfg.corpus_dir);
    std::cout << "train: " << dataset.size() << " images from " << cfg.corpus_dir << "\n";

    UNetDenoiser model = [&] {
        if (resume) {
            UNetDenoiser m = UNetDenoiser::load_checkpoint(cfg.checkpoint_path);
            if (!(m.schedule_params() == cfg.schedule))
                throw config_error("train: checkpoint schedule differs from the configured one");
            if (m.family() != cfg.train.noise_family)
                throw config_error("train: checkpoint noise family differs from --family");
            std::cout << "resuming from " << cfg.checkpoint_path << " ("
                      << m.trained_iterations() << " iterations so far)\n";
            return m;
        }
        if (fs::exists(cfg.checkpoint_path) && !cfg.force)
            throw data_error("checkpoint exists: " + cfg.checkpoint_path +
                             " (use --resume to continue or --force to restart)");
        return UNetDenoiser(UNetSpec{}, cfg.train.noise_family, cfg.schedule, cfg.seed);
    }();

    const fs::path ckpt(cfg.checkpoint_path);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    std::ofstream loss_csv(cfg.checkpoint_path + ".loss.csv",
                           resume ? std::ios::app : std::ios::trunc);
    if (!loss_csv) throw data_error("cannot write loss CSV next to the checkpoint");

    const int every = std::max(1, cfg.train.iterations / 20);
    train_epsilon_model(dataset, cfg.train, model, cfg.checkpoint_path, &loss_csv,
                        [&](int iter, double loss) {
                            if (iter % every == 0 || iter == cfg.train.iterations)
                                std::cout << "iter " << iter << "  loss " << loss << std::endl;
                        });
    write_run_json(cfg, ckpt.has_parent_path() ? ckpt.parent_path() : fs::path("."));
    std::cout << "checkpoint: " << cfg.checkpoint_path << " ("
              << model.trained_iterations() << " total iterations)\n";
    return 0;
}

// ---------------------------------------------------------------- denoise

struct DenoiseContext {
    Variant variant = Variant::Gard;
    std::unique_ptr<UNetDenoiser> model;
    NoiseSchedule schedule;
    InferenceConfig inference;
    NlmParams nlm;
    bool verbose = false;
};

// Denoises one raw8bit image; returns (output, guide) in raw8bit.
std::pair<ImageField, ImageField> denoise_one(const DenoiseContext& ctx, const ImageField& raw) {
    const ImageField y = normalize(raw, Domain::Raw8bit, Domain::Normalized);
    if (ctx.variant == Variant::NlmOnly) {
        const ImageField out = nlm_fast(y, ctx.nlm);
        return {normalize(out, Domain::Normalized, Domain::Raw8bit),
                normalize(out, Domain::Normalized, Domain::Raw8bit)};
    }
    ImageField guide = y;
    FidelityHook hook;
    if (ctx.inference.fidelity == FidelityKind::Nrft) {
        if (ctx.verbose) std::cout << "computing NLM guide\n";
        guide = nlm_fast(y, ctx.nlm);
    } else if (ctx.verbose) {
        std::cout << "fidelity=" << fidelity_kind_name(ctx.inference.fidelity)
                  << ", NLM guide skipped\n";
    }
    if (ctx.inference.fidelity != FidelityKind::None) {
        const double mu = ctx.inference.mu;
        hook = [&guide, mu](const ImageField& x) {
            FidelityProblem prob;
            prob.guide = guide;
            prob.anchor = x;
            prob.mu = mu;
            return nrft_refine(prob);
        };
    }
    const ImageField out = ddim_trajectory(ctx.schedule, y, *ctx.model, ctx.inference, hook);
    return {normalize(out, Domain::Normalized, Domain::Raw8bit),
            normalize(guide, Domain::Normalized, Domain::Raw8bit)};
}

ImageField make_panel(const ImageField& a, const ImageField& b, const ImageField& c) {
    const int sep = 2;
    ImageField panel(a.height, a.width * 3 + 2 * sep, Domain::Raw8bit, 255.0);
    auto blit = [&](const ImageField& src, int c0) {
        for (int r = 0; r < src.height; ++r)
            for (int cc = 0; cc < src.width; ++cc) panel.at(r, c0 + cc) = src.at(r, cc);
    };
    blit(a, 0);
    blit(b, a.width + sep);
    blit(c, 2 * (a.width + sep));
    return panel;
}

DenoiseContext make_context(const RunConfig& cfg, bool verbose) {
    DenoiseContext ctx;
    ctx.variant = variant_from_name(cfg.variant);
    ctx.nlm = cfg.nlm;
    ctx.inference = cfg.inference;
    ctx.verbose = verbose;
    if (ctx.variant == Variant::NlmOnly) return ctx;

    apply_variant(ctx.variant, ctx.inference);
    if (cfg.checkpoint_path.empty()) throw config_error("denoise: --checkpoint is required");
    ctx.model = std::make_unique<UNetDenoiser>(UNetDenoiser::load_checkpoint(cfg.checkpoint_path));
    if (ctx.model->family() != ctx.inference.noise_family)
        throw config_error("denoise: checkpoint family '" +
                           noise_family_name(ctx.model->family()) + "' does not match variant '" +
                           cfg.variant + "'");
    ctx.schedule = ctx.model->schedule_params().build();
    ctx.inference.validate(ctx.schedule.T);
    return ctx;
}

int cmd_denoise(const RunConfig& cfg, const std::string& panel_path, bool verbose,
                bool schedule_explicit) {
    DenoiseContext ctx = make_context(cfg, verbose);
    if (ctx.model && schedule_explicit && !(cfg.schedule == ctx.model->schedule_params()))
        throw config_error("denoise: configured schedule differs from the checkpoint's");

    if (!cfg.input_path.empty()) {
        if (cfg.output_path.empty()) throw config_error("denoise: --output is required");
        const ImageField raw = load_image(cfg.input_path);
        auto [out, guide] = denoise_one(ctx, raw);
        const fs::path outp(cfg.output_path);
        if (outp.has_parent_path()) fs::create_directories(outp.parent_path());
        save_image(out, cfg.output_path);
        if (!panel_path.empty()) save_image(make_panel(raw, guide, out), panel_path);
        write_run_json(cfg, outp.has_parent_path() ? outp.parent_path() : fs::path("."));
        std::cout << "wrote " << cfg.output_path << "\n";
        return 0;
    }

    // corpus mode: denoise every noisy image into output_path/<variant>/
    if (cfg.corpus_dir.empty())
        throw config_error("denoise: need --input FILE or --corpus DIR");
    if (cfg.output_path.empty()) throw config_error("denoise: --output is required");
    const CorpusManifest m = read_manifest(cfg.corpus_dir);
    const fs::path outdir = fs::path(cfg.output_path) / cfg.variant;
    fs::create_directories(outdir);

    const int jobs = std::max(1, cfg.jobs);
    std::vector<ImageField> results(m.count);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= m.count) return;
            const ImageField raw =
                load_image((fs::path(cfg.corpus_dir) / "noisy" / sample_name(i)).string());
            results[i] = denoise_one(ctx, raw).first;
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (int i = 0; i < m.count; ++i)
        save_image(results[i], (outdir / sample_name(i)).string());
    write_run_json(cfg, fs::path(cfg.output_path));
    std::cout << "wrote " << m.count << " images under " << outdir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const RunConfig& cfg, std::vector<std::string> variants,
                 const std::string& outputs_root, const std::string& reference) {
    if (cfg.corpus_dir.empty()) throw config_error("evaluate: --corpus is required");
    if (cfg.output_path.empty()) throw config_error("evaluate: --output is required");
    if (variants.empty()) variants = {"noisy"};
    if (reference != "avg" && reference != "clean")
        throw config_error("evaluate: --reference must be avg|clean");
    const CorpusManifest m = read_manifest(cfg.corpus_dir);

    auto image_for = [&](const std::string& variant, int i) -> ImageField {
        if (variant == "noisy")
            return load_image((fs::path(cfg.corpus_dir) / "noisy" / sample_name(i)).string());
        const fs::path p = fs::path(outputs_root) / variant / sample_name(i);
        if (!fs::exists(p))
            throw data_error("evaluate: missing output for variant '" + variant +
                             "': " + p.string());
        return load_image(p.string());
    };
    for (const auto& v : variants)
        if (v != "noisy" && outputs_root.empty())
            throw config_error("evaluate: --outputs is required for variant '" + v + "'");

    std::map<std::string, std::vector<ImageMetrics>> rows;
    for (int i = 0; i < m.count; ++i) {
        const PairedSample s = load_sample(cfg.corpus_dir, i);
        const ImageField& ref = reference == "avg" ? s.less_noisy : s.clean;
        for (const auto& v : variants) {
            const ImageField img = image_for(v, i);
            ImageMetrics im;
            im.id = sample_name(i);
            im.mse = mse(img, ref);
            im.psnr = psnr(img, ref);
            im.ssim = ssim(img, ref);
            rows[v].push_back(im);
        }
    }

    fs::create_directories(cfg.output_path);
    std::ofstream csv(fs::path(cfg.output_path) / "per_image.csv");
    csv << "variant,id,psnr,ssim,mse\n";
    for (const auto& v : variants)
        for (const auto& r : rows[v])
            csv << v << ',' << r.id << ',' << fmt_metric(r.psnr) << ',' << fmt_metric(r.ssim)
                << ',' << fmt_metric(r.mse) << '\n';

    nlohmann::json summary;
    summary["reference"] = reference;
    summary["conventions"] = {
        {"metric_scale", "raw8bit floats (0-255), no re-quantization"},
        {"ssim", {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03},
                  {"data_range", 255}, {"coverage", "windows fully inside the image"}}},
        {"psnr", "10*log10(255^2/mse); identical images reported as inf"},
        {"aggregate", "mean and n-1 standard deviation of per-image metrics"},
    };
    for (const auto& v : variants) {
        const MetricAggregate a = aggregate_metrics(rows[v]);
        summary["variants"][v] = {
            {"mean_psnr", a.mean_psnr}, {"sd_psnr", a.sd_psnr}, {"mean_ssim", a.mean_ssim},
            {"sd_ssim", a.sd_ssim},     {"mean_mse", a.mean_mse}, {"sd_mse", a.sd_mse},
            {"n", rows[v].size()},
        };
    }

    summary["significance"] = nlohmann::json::array();
    struct MetricGetter {
        const char* name;
        double (*get)(const ImageMetrics&);
    };
    const MetricGetter getters[] = {
        {"psnr", [](const ImageMetrics& r) { return r.psnr; }},
        {"ssim", [](const ImageMetrics& r) { return r.ssim; }},
        {"mse", [](const ImageMetrics& r) { return r.mse; }},
    };
    for (size_t a = 0; a < variants.size(); ++a)
        for (size_t b = a + 1; b < variants.size(); ++b)
            for (const auto& g : getters) {
                std::vector<double> diffs;
                for (int i = 0; i < m.count; ++i)
                    diffs.push_back(g.get(rows[variants[a]][i]) - g.get(rows[variants[b]][i]));
                const WilcoxonResult w = wilcoxon_signed_rank(diffs);
                summary["significance"].push_back({
                    {"pair", {variants[a], variants[b]}},
                    {"metric", g.name},
                    {"W", w.statistic},
                    {"p_value", w.p_value},
                    {"n_nonzero", w.n_nonzero},
                    {"exact", w.exact},
                    {"degenerate", w.degenerate},
                });
            }

    std::ofstream js(fs::path(cfg.output_path) / "summary.json");
    js << summary.dump(2) << '\n';
    write_run_json(cfg, cfg.output_path);

    for (const auto& v : variants) {
        const MetricAggregate a = aggregate_metrics(rows[v]);
        std::cout << v << ": PSNR " << fmt_metric(a.mean_psnr) << " (" << fmt_metric(a.sd_psnr)
                  << ")  SSIM " << fmt_metric(a.mean_ssim) << "  MSE " << fmt_metric(a.mean_mse)
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- schedule-dump

int cmd_schedule_dump(const RunConfig& cfg, const std::string& out_path) {
    const NoiseSchedule s = cfg.schedule.build();
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw data_error("cannot write " + out_path);
        os = &file;
    }
    char buf[256];
    *os << "t,beta,alpha,alpha_bar,gamma_shape,gamma_scale,gamma_shape_cum,marginal_std\n";
    for (int t = 1; t <= s.T; ++t) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, s.beta_at(t),
                      s.alpha_at(t), s.alpha_bar_at(t), s.shape_at(t), s.scale_at(t),
                      s.shape_cum_at(t), marginal_std(s, t));
        *os << buf;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    bool file_has_schedule = false;

    // --config seeds the defaults; explicit flags below override it.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                cfg = load_run_config(argv[i + 1]);
                std::ifstream is(argv[i + 1]);
                nlohmann::json j;
                is >> j;
                file_has_schedule = j.contains("schedule");
            } catch (const config_error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            } catch (const std::exception& e) {
                std::cerr << "error: cannot load config: " << e.what() << "\n";
                return 2;
            }
        }
    }

    CLI::App app{"Gamma-diffusion speckle removal for OCT-like images"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override its values)");

    auto add_schedule_flags = [&](CLI::App* c) {
        c->add_option("--T", cfg.schedule.T, "diffusion steps");
        c->add_option("--beta-start", cfg.schedule.beta_start, "first beta");
        c->add_option("--beta-end", cfg.schedule.beta_end, "last beta");
        c->add_option("--theta0", cfg.schedule.theta0, "base Gamma scale");
    };
    auto schedule_explicit = [&](CLI::App* c) {
        return file_has_schedule || c->count("--T") || c->count("--beta-start") ||
               c->count("--beta-end") || c->count("--theta0");
    };

    // simulate
    CLI::App* sim = app.add_subcommand("simulate", "generate a paired phantom corpus");
    sim->add_option("--corpus", cfg.corpus_dir, "output corpus directory");
    sim->add_option("--count", cfg.corpus_count, "number of samples");
    sim->add_option("--seed", cfg.seed, "master seed");
    sim->add_option("--width", cfg.phantom.width);
    sim->add_option("--height", cfg.phantom.height);
    sim->add_option("--layers", cfg.phantom.n_layers);
    sim->add_option("--waviness", cfg.phantom.boundary_waviness);
    sim->add_option("--reflectivity-lo", cfg.phantom.reflectivity_range.first);
    sim->add_option("--reflectivity-hi", cfg.phantom.reflectivity_range.second);
    sim->add_option("--vessels", cfg.phantom.n_vessels);
    sim->add_option("--blur", cfg.phantom.blur_sigma);
    sim->add_option("--looks", cfg.speckle.looks);
    sim->add_option("--avg-count", cfg.speckle.averaging_count);
    std::string display = "";
    sim->add_option("--display", display, "fourth_root|log");
    sim->add_flag("--force", cfg.force, "overwrite an existing corpus");

    // train
    CLI::App* tr = app.add_subcommand("train", "train the noise-prediction model");
    bool resume = false;
    tr->add_option("--corpus", cfg.corpus_dir, "training corpus");
    tr->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint file");
    tr->add_option("--iterations", cfg.train.iterations);
    tr->add_option("--batch", cfg.train.batch_size);
    tr->add_option("--lr", cfg.train.learning_rate);
    tr->add_option("--weight-decay", cfg.train.weight_decay);
    std::string family = "";
    tr->add_option("--family", family, "gamma|gaussian");
    bool no_hflip = false;
    tr->add_flag("--no-hflip", no_hflip, "disable horizontal flip augmentation");
    tr->add_option("--checkpoint-every", cfg.train.checkpoint_every);
    tr->add_option("--seed", cfg.seed, "init/data seed");
    tr->add_option("--crop", cfg.train.crop_size);
    tr->add_flag("--resume", resume, "continue from the existing checkpoint");
    tr->add_flag("--force", cfg.force, "overwrite an existing checkpoint");
    add_schedule_flags(tr);

    // denoise
    CLI::App* dn = app.add_subcommand("denoise", "denoise an image or a corpus");
    std::string panel_path;
    bool verbose = false;
    dn->add_option("--input", cfg.input_path, "input PNG");
    dn->add_option("--corpus", cfg.corpus_dir, "denoise all noisy images of this corpus");
    dn->add_option("--output", cfg.output_path, "output PNG (or directory in corpus mode)");
    dn->add_option("--checkpoint", cfg.checkpoint_path, "trained model");
    dn->add_option("--variant", cfg.variant, "gard|ddgm|ddgm+cpdm|ddpm|ddpm+cpdm|ddpm+nrft|nlm-only");
    dn->add_option("--t-start", cfg.inference.t_start);
    dn->add_option("--stride", cfg.inference.stride);
    dn->add_option("--mu", cfg.inference.mu);
    dn->add_option("--nlm-patch", cfg.nlm.patch_radius);
    dn->add_option("--nlm-search", cfg.nlm.search_radius);
    dn->add_option("--nlm-h", cfg.nlm.h);
    dn->add_option("--nlm-sigma", cfg.nlm.noise_std_estimate);
    dn->add_option("--panel", panel_path, "side-by-side input|guide|output PNG");
    dn->add_option("--jobs", cfg.jobs, "parallel images in corpus mode");
    dn->add_flag("--verbose", verbose);
    add_schedule_flags(dn);

    // evaluate
    CLI::App* ev = app.add_subcommand("evaluate", "metrics and significance over a corpus");
    std::vector<std::string> variants;
    std::string outputs_root, reference = "avg";
    ev->add_option("--corpus", cfg.corpus_dir, "evaluation corpus");
    ev->add_option("--output", cfg.output_path, "report directory");
    ev->add_option("--variants", variants, "noisy plus any denoised variant names")
        ->delimiter(',');
    ev->add_option("--outputs", outputs_root, "directory holding <variant>/NNNN.png outputs");
    ev->add_option("--reference", reference, "avg|clean");

    // schedule-dump
    CLI::App* sd = app.add_subcommand("schedule-dump", "write the schedule table as CSV");
    std::string dump_path;
    sd->add_option("--output", dump_path, "CSV path (stdout when omitted)");
    add_schedule_flags(sd);

    for (CLI::App* c : {sim, tr, dn, ev, sd})
        c->add_option("--config", config_path, "JSON config file (flags override its values)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*sim) {
            if (!display.empty()) {
                if (display == "fourth_root") cfg.speckle.display_transform = DisplayTransform::FourthRoot;
                else if (display == "log") cfg.speckle.display_transform = DisplayTransform::Log;
                else throw config_error("simulate: --display must be fourth_root|log");
            }
            return cmd_simulate(cfg);
        }
        if (*tr) {
            if (!family.empty()) cfg.train.noise_family = noise_family_from_name(family);
            if (no_hflip) cfg.train.augment_hflip = false;
            cfg.train.seed = cfg.seed;
            return cmd_train(cfg, resume);
        }
        if (*dn) return cmd_denoise(cfg, panel_path, verbose, schedule_explicit(dn));
        if (*ev) return cmd_evaluate(cfg, variants, outputs_root, reference);
        if (*sd) return cmd_schedule_dump(cfg, dump_path);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
