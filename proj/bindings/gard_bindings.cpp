// Python surface: thin conversions around the library. Arrays are 2-D float64,
// row-major; the value domain (raw 0-255 vs normalized [-1,1] vs linear
// intensity) follows the wrapped function's contract.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "gard/corpus.hpp"
#include "gard/denoiser.hpp"
#include "gard/diffusion.hpp"
#include "gard/fidelity.hpp"
#include "gard/metrics.hpp"
#include "gard/phantom.hpp"
#include "gard/sampler.hpp"
#include "gard/schedule.hpp"

namespace py = pybind11;
using namespace gard;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageField to_field(const DoubleArray& a, Domain domain) {
    if (a.ndim() != 2) throw config_error("expected a 2-D array");
    ImageField img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), domain);
    std::memcpy(img.values.data(), a.data(), sizeof(double) * img.size());
    return img;
}

py::array_t<double> to_array(const ImageField& img) {
    py::array_t<double> a({img.height, img.width});
    std::memcpy(a.mutable_data(), img.values.data(), sizeof(double) * img.size());
    return a;
}

// 1-D copy; the array_t(count) ctor must be avoided (it yields stride-0 arrays).
template <class T>
py::array_t<T> to_array_1d(const std::vector<T>& v) {
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

NoiseFamily family_from(const std::string& name) {
    if (name == "gamma") return NoiseFamily::Gamma;
    if (name == "gaussian") return NoiseFamily::Gaussian;
    throw config_error("unknown noise family '" + name + "' (gamma|gaussian)");
}

FidelityKind fidelity_from(const std::string& name) {
    if (name == "none") return FidelityKind::None;
    if (name == "raw") return FidelityKind::Raw;
    if (name == "nrft") return FidelityKind::Nrft;
    throw config_error("unknown fidelity '" + name + "' (none|raw|nrft)");
}

DisplayTransform transform_from(const std::string& name) {
    if (name == "fourth_root") return DisplayTransform::FourthRoot;
    if (name == "log") return DisplayTransform::Log;
    throw config_error("unknown display transform '" + name + "' (fourth_root|log)");
}

NlmParams nlm_params(int patch_radius, int search_radius, double h, double noise_std) {
    NlmParams p;
    p.patch_radius = patch_radius;
    p.search_radius = search_radius;
    p.h = h;
    p.noise_std_estimate = noise_std;
    return p;
}

}  // namespace

PYBIND11_MODULE(_gard, m) {
    m.doc() = "Gamma-diffusion speckle removal: schedule, sampling, NLM/NRFT fidelity, "
              "U-Net denoiser, phantoms and metrics";

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<data_error>(m, "DataError", PyExc_IOError);
    py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);

    // ---- schedule ----
    m.def(
        "schedule_table",
        [](int T, double beta_start, double beta_end, double theta0) {
            const NoiseSchedule s = build_linear_schedule(T, beta_start, beta_end, theta0);
            auto vec = [&](double (NoiseSchedule::*get)(int) const) {
                std::vector<double> v(T);
                for (int t = 1; t <= T; ++t) v[t - 1] = (s.*get)(t);
                return to_array_1d(v);
            };
            std::vector<int> ts(T);
            std::vector<double> stds(T);
            for (int t = 1; t <= T; ++t) {
                ts[t - 1] = t;
                stds[t - 1] = marginal_std(s, t);
            }
            py::dict d;
            d["t"] = to_array_1d(ts);
            d["beta"] = vec(&NoiseSchedule::beta_at);
            d["alpha_bar"] = vec(&NoiseSchedule::alpha_bar_at);
            d["k"] = vec(&NoiseSchedule::shape_at);
            d["theta"] = vec(&NoiseSchedule::scale_at);
            d["k_cum"] = vec(&NoiseSchedule::shape_cum_at);
            d["marginal_std"] = to_array_1d(stds);
            return d;
        },
        py::arg("T") = 1000, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02,
        py::arg("theta0") = 0.1,
        "Per-timestep schedule quantities as arrays indexed by t-1 (t is 1-based).");

    // ---- sampling ----
    m.def(
        "sample_gamma",
        [](double k, double theta, size_t size, std::uint64_t seed) {
            return to_array_1d(sample_gamma(k, theta, size, seed));
        },
        py::arg("k"), py::arg("theta"), py::arg("size"), py::arg("seed"),
        "I.i.d. Gamma(k, theta) draws.");

    // ---- forward / reverse diffusion ----
    m.def(
        "forward_marginal",
        [](const DoubleArray& x0, int t, std::uint64_t seed, const std::string& family, int T,
           double beta_start, double beta_end, double theta0) {
            const NoiseSchedule s = build_linear_schedule(T, beta_start, beta_end, theta0);
            const auto fm = forward_marginal(s, to_field(x0, Domain::Normalized), t, seed,
                                             family_from(family));
            ImageField eps(fm.x_t.height, fm.x_t.width, Domain::Normalized);
            eps.values = fm.eps_true.values;
            return py::make_tuple(to_array(fm.x_t), to_array(eps));
        },
        py::arg("x0"), py::arg("t"), py::arg("seed"), py::arg("family") = "gamma",
        py::arg("T") = 1000, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02,
        py::arg("theta0") = 0.1,
        "Closed-form jump to timestep t; returns (x_t, standardized noise).");

    m.def(
        "forward_step",
        [](const DoubleArray& x_prev, int t, std::uint64_t seed, int T, double beta_start,
           double beta_end, double theta0) {
            const NoiseSchedule s = build_linear_schedule(T, beta_start, beta_end, theta0);
            return to_array(forward_step(s, to_field(x_prev, Domain::Normalized), t, seed));
        },
        py::arg("x_prev"), py::arg("t"), py::arg("seed"), py::arg("T") = 1000,
        py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02, py::arg("theta0") = 0.1,
        "Single forward step t-1 -> t with centered Gamma noise.");

    // ---- fidelity ----
    m.def(
        "estimate_noise_std",
        [](const DoubleArray& y) { return estimate_noise_std(to_field(y, Domain::Normalized)); },
        py::arg("y"), "Robust noise std from Haar HH coefficients.");

    m.def(
        "nlm",
        [](const DoubleArray& y, int patch_radius, int search_radius, double h, double noise_std,
           bool fast) {
            const auto p = nlm_params(patch_radius, search_radius, h, noise_std);
            const ImageField img = to_field(y, Domain::Normalized);
            return to_array(fast ? nlm_fast(img, p) : nlm_reference(img, p));
        },
        py::arg("y"), py::arg("patch_radius") = 2, py::arg("search_radius") = 7,
        py::arg("h") = 0.0, py::arg("noise_std") = 0.0, py::arg("fast") = true,
        "Non-local means on a normalized image (h<=0: 0.8*sigma, noise_std<=0: estimate).");

    m.def(
        "nrft",
        [](const DoubleArray& guide, const DoubleArray& anchor, double mu) {
            FidelityProblem prob;
            prob.guide = to_field(guide, Domain::Normalized);
            prob.anchor = to_field(anchor, Domain::Normalized);
            prob.mu = mu;
            return to_array(nrft_refine(prob));
        },
        py::arg("guide"), py::arg("anchor"), py::arg("mu") = 10.0,
        "Per-pixel root of 1 - exp(guide - z) + 2*mu*(z - anchor).");

    // ---- model ----
    py::class_<UNetDenoiser>(m, "Denoiser")
        .def(py::init([](int base_channels, int time_dim, int group_size,
                         const std::string& family, int T, double beta_start, double beta_end,
                         double theta0, std::uint64_t seed) {
                 UNetSpec spec;
                 spec.base_channels = base_channels;
                 spec.time_dim = time_dim;
                 spec.group_size = group_size;
                 ScheduleParams sp{T, beta_start, beta_end, theta0};
                 return UNetDenoiser(spec, family_from(family), sp, seed);
             }),
             py::arg("base_channels") = 16, py::arg("time_dim") = 32, py::arg("group_size") = 8,
             py::arg("family") = "gamma", py::arg("T") = 1000, py::arg("beta_start") = 1e-4,
             py::arg("beta_end") = 0.02, py::arg("theta0") = 0.1, py::arg("seed") = 0)
        .def_static("load", &UNetDenoiser::load_checkpoint, py::arg("path"))
        .def("save", &UNetDenoiser::save_checkpoint, py::arg("path"))
        .def_property_readonly("iterations", &UNetDenoiser::trained_iterations)
        .def_property_readonly(
            "family",
            [](const UNetDenoiser& d) {
                return d.family() == NoiseFamily::Gamma ? "gamma" : "gaussian";
            })
        .def_property_readonly("spec",
                               [](const UNetDenoiser& d) {
                                   py::dict s;
                                   s["base_channels"] = d.spec().base_channels;
                                   s["time_dim"] = d.spec().time_dim;
                                   s["group_size"] = d.spec().group_size;
                                   s["T"] = d.schedule_params().T;
                                   return s;
                               })
        .def(
            "predict",
            [](UNetDenoiser& d, const DoubleArray& x_t, int t) {
                const ImageField img = to_field(x_t, Domain::Normalized);
                std::vector<double> eps;
                {
                    py::gil_scoped_release release;
                    eps = predict_noise(d, img, t);
                }
                ImageField out(img.height, img.width, Domain::Normalized);
                out.values = std::move(eps);
                return to_array(out);
            },
            py::arg("x_t"), py::arg("t"), "Predicted standardized noise, same shape as x_t.")
        .def(
            "train",
            [](UNetDenoiser& d, const std::vector<DoubleArray>& images, int iterations,
               int batch_size, double learning_rate, double weight_decay, int crop_size,
               bool hflip, int checkpoint_every, std::uint64_t seed,
               const std::string& checkpoint_path,
               const std::optional<py::function>& progress, int progress_every) {
                std::vector<ImageField> dataset;
                dataset.reserve(images.size());
                for (const auto& a : images) dataset.push_back(to_field(a, Domain::Normalized));
                TrainConfig cfg;
                cfg.iterations = iterations;
                cfg.batch_size = batch_size;
                cfg.learning_rate = learning_rate;
                cfg.weight_decay = weight_decay;
                cfg.crop_size = crop_size;
                cfg.augment_hflip = hflip;
                cfg.checkpoint_every = checkpoint_every;
                cfg.seed = seed;
                cfg.noise_family = d.family();
                std::function<void(int, double)> cb;
                if (progress && progress_every > 0)
                    cb = [&](int iter, double loss) {
                        if (iter % progress_every == 0) {
                            py::gil_scoped_acquire acquire;
                            (*progress)(iter, loss);
                        }
                    };
                TrainResult res;
                {
                    py::gil_scoped_release release;
                    res = train_epsilon_model(dataset, cfg, d, checkpoint_path, nullptr, cb);
                }
                std::vector<double> losses(res.loss_log.size());
                for (size_t i = 0; i < res.loss_log.size(); ++i)
                    losses[i] = res.loss_log[i].second;
                return to_array_1d(losses);
            },
            py::arg("images"), py::arg("iterations"), py::arg("batch_size") = 8,
            py::arg("learning_rate") = 3e-4, py::arg("weight_decay") = 1e-4,
            py::arg("crop_size") = 64, py::arg("hflip") = true, py::arg("checkpoint_every") = 0,
            py::arg("seed") = 0, py::arg("checkpoint_path") = "",
            py::arg("progress") = std::nullopt, py::arg("progress_every") = 0,
            "AdamW epsilon-model training on normalized images; returns per-iteration loss.");

    m.def(
        "ddim_denoise",
        [](const DoubleArray& x_start, UNetDenoiser& model, int t_start, int stride,
           const std::string& fidelity, double mu, const std::optional<DoubleArray>& guide) {
            const NoiseSchedule s = model.schedule_params().build();
            InferenceConfig cfg;
            cfg.t_start = t_start;
            cfg.stride = stride;
            cfg.fidelity = fidelity_from(fidelity);
            cfg.mu = mu;
            cfg.noise_family = model.family();
            cfg.validate(s.T);
            const ImageField x = to_field(x_start, Domain::Normalized);
            ImageField g;
            FidelityHook hook;
            if (cfg.fidelity != FidelityKind::None) {
                if (!guide) throw config_error("ddim_denoise: fidelity needs a guide image");
                g = to_field(*guide, Domain::Normalized);
                hook = [&g, mu](const ImageField& anchor) {
                    FidelityProblem prob;
                    prob.guide = g;
                    prob.anchor = anchor;
                    prob.mu = mu;
                    return nrft_refine(prob);
                };
            }
            ImageField out;
            {
                py::gil_scoped_release release;
                out = ddim_trajectory(s, x, model, cfg, hook);
            }
            return to_array(out);
        },
        py::arg("x_start"), py::arg("model"), py::arg("t_start") = 70, py::arg("stride") = 10,
        py::arg("fidelity") = "none", py::arg("mu") = 10.0, py::arg("guide") = std::nullopt,
        "Deterministic reverse trajectory from x_start; optional per-step NRFT refinement "
        "toward a guide.");

    // ---- phantoms / speckle / domains ----
    m.def(
        "generate_phantom",
        [](int width, int height, int n_layers, double boundary_waviness, double reflectivity_lo,
           double reflectivity_hi, int n_vessels, double blur_sigma, std::uint64_t seed) {
            PhantomParams p;
            p.width = width;
            p.height = height;
            p.n_layers = n_layers;
            p.boundary_waviness = boundary_waviness;
            p.reflectivity_range = {reflectivity_lo, reflectivity_hi};
            p.n_vessels = n_vessels;
            p.blur_sigma = blur_sigma;
            p.seed = seed;
            return to_array(generate_phantom(p));
        },
        py::arg("width") = 64, py::arg("height") = 64, py::arg("n_layers") = 7,
        py::arg("boundary_waviness") = 1.5, py::arg("reflectivity_lo") = 0.15,
        py::arg("reflectivity_hi") = 0.95, py::arg("n_vessels") = 2, py::arg("blur_sigma") = 0.8,
        py::arg("seed") = 0, "Layered phantom in linear intensity, values in (0,1].");

    m.def(
        "to_display",
        [](const DoubleArray& linear, const std::string& transform) {
            return to_array(
                to_display(to_field(linear, Domain::LinearIntensity), transform_from(transform)));
        },
        py::arg("linear"), py::arg("transform") = "fourth_root",
        "Display transform of a linear-intensity field onto the 0-255 scale.");

    m.def(
        "apply_speckle",
        [](const DoubleArray& clean_linear, double looks, const std::string& transform,
           int averaging_count, std::uint64_t seed) {
            SpeckleParams sp;
            sp.looks = looks;
            sp.display_transform = transform_from(transform);
            sp.averaging_count = averaging_count;
            const PairedSample s =
                apply_speckle(to_field(clean_linear, Domain::LinearIntensity), sp, seed);
            py::dict d;
            d["clean"] = to_array(s.clean);
            d["noisy"] = to_array(s.noisy);
            d["less_noisy"] = to_array(s.less_noisy);
            return d;
        },
        py::arg("clean_linear"), py::arg("looks") = 4.0, py::arg("transform") = "fourth_root",
        py::arg("averaging_count") = 30, py::arg("seed") = 0,
        "Multiplicative Gamma speckle; returns display-scale clean/noisy/less_noisy.");

    m.def(
        "to_normalized",
        [](const DoubleArray& raw) {
            return to_array(normalize(to_field(raw, Domain::Raw8bit), Domain::Raw8bit,
                                      Domain::Normalized));
        },
        py::arg("raw"), "0-255 -> [-1,1].");
    m.def(
        "to_raw",
        [](const DoubleArray& normalized) {
            return to_array(normalize(to_field(normalized, Domain::Normalized),
                                      Domain::Normalized, Domain::Raw8bit));
        },
        py::arg("normalized"), "[-1,1] -> 0-255 with clipping.");

    // ---- metrics ----
    m.def(
        "mse",
        [](const DoubleArray& a, const DoubleArray& b) {
            return mse(to_field(a, Domain::Raw8bit), to_field(b, Domain::Raw8bit));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "psnr",
        [](const DoubleArray& a, const DoubleArray& b, double data_range) {
            return psnr(to_field(a, Domain::Raw8bit), to_field(b, Domain::Raw8bit), data_range);
        },
        py::arg("a"), py::arg("b"), py::arg("data_range") = 255.0);
    m.def(
        "ssim",
        [](const DoubleArray& a, const DoubleArray& b) {
            return ssim(to_field(a, Domain::Raw8bit), to_field(b, Domain::Raw8bit));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "wilcoxon",
        [](const std::vector<double>& diffs) {
            const WilcoxonResult r = wilcoxon_signed_rank(diffs);
            py::dict d;
            d["statistic"] = r.statistic;
            d["p_value"] = r.p_value;
            d["n_nonzero"] = r.n_nonzero;
            d["exact"] = r.exact;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("diffs"), "Two-sided Wilcoxon signed-rank test on paired differences.");
}
