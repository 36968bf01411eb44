#include "gard/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gard/diffusion.hpp"
#include "gard/unet.hpp"

namespace gard {

std::vector<double> OracleBackend::predict(const ImageField& x_t, int t) {
    if (!x_t.same_shape(x0_)) throw config_error("oracle backend: shape mismatch");
    const double root_abar = std::sqrt(schedule_.alpha_bar_at(t));
    const double std = marginal_std(schedule_, t);
    std::vector<double> eps(x_t.size());
    for (size_t i = 0; i < eps.size(); ++i)
        eps[i] = (x_t.values[i] - root_abar * x0_.values[i]) / std;
    return eps;
}

void TrainConfig::validate() const {
    if (iterations < 1) throw config_error("train: iterations must be >= 1");
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw config_error("train: learning_rate must be > 0");
    if (weight_decay < 0.0) throw config_error("train: weight_decay must be >= 0");
    if (checkpoint_every < 0) throw config_error("train: checkpoint_every must be >= 0");
    if (crop_size < 8 || crop_size % 4 != 0)
        throw config_error("train: crop_size must be a multiple of 4, >= 8");
}

struct UNetDenoiser::Impl {
    nn::UNetNet<float> net;
};

UNetDenoiser::UNetDenoiser() : impl_(new Impl) {}

UNetDenoiser::UNetDenoiser(const UNetSpec& spec, NoiseFamily family,
                           const ScheduleParams& schedule, std::uint64_t init_seed)
    : spec_(spec), family_(family), schedule_params_(schedule), impl_(new Impl) {
    if (spec.base_channels < 1 || spec.time_dim < 2 || spec.group_size < 1)
        throw config_error("unet: invalid spec");
    impl_->net.init(spec, init_seed);
}

UNetDenoiser::~UNetDenoiser() = default;
UNetDenoiser::UNetDenoiser(UNetDenoiser&&) noexcept = default;
UNetDenoiser& UNetDenoiser::operator=(UNetDenoiser&&) noexcept = default;

std::vector<double> UNetDenoiser::predict(const ImageField& x_t, int t) {
    if (t < 1 || t > schedule_params_.T)
        throw config_error("unet predict: t outside [1,T]");
    if (x_t.height < 8 || x_t.width < 8)
        throw config_error("unet predict: image must be at least 8x8");
    const int H = x_t.height, W = x_t.width;
    const int Hp = (H + 3) / 4 * 4, Wp = (W + 3) / 4 * 4;

    // mirror-pad on the bottom/right edges up to a multiple of 4
    nn::Mat<float> x(static_cast<long>(Hp) * Wp, 1);
    for (int r = 0; r < Hp; ++r) {
        const int sr = r < H ? r : 2 * H - r - 1;
        for (int c = 0; c < Wp; ++c) {
            const int sc = c < W ? c : 2 * W - c - 1;
            x(static_cast<long>(r) * Wp + c, 0) = static_cast<float>(x_t.at(sr, sc));
        }
    }
    nn::UNetCache<float> cache;
    nn::Mat<float> y = nn::unet_forward(impl_->net, x, Hp, Wp, t, cache);
    std::vector<double> out(x_t.size());
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            out[static_cast<size_t>(r) * W + c] = y(static_cast<long>(r) * Wp + c, 0);
    return out;
}

namespace {

constexpr char kMagic[8] = {'G', 'A', 'R', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
}

}  // namespace

void UNetDenoiser::save_checkpoint(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    const std::uint8_t fam = family_ == NoiseFamily::Gamma ? 0 : 1;
    write_pod(os, fam);
    write_pod(os, trained_iterations_);
    write_pod(os, schedule_params_.T);
    write_pod(os, schedule_params_.beta_start);
    write_pod(os, schedule_params_.beta_end);
    write_pod(os, schedule_params_.theta0);
    write_pod(os, spec_.base_channels);
    write_pod(os, spec_.time_dim);
    write_pod(os, spec_.group_size);

    auto params = const_cast<Impl*>(impl_.get())->net.params();
    const std::uint32_t n = static_cast<std::uint32_t>(params.size());
    write_pod(os, n);
    for (auto& p : params) {
        const std::uint32_t len = static_cast<std::uint32_t>(p.name.size());
        write_pod(os, len);
        os.write(p.name.data(), len);
        const std::int64_t rows = p.value->rows(), cols = p.value->cols();
        write_pod(os, rows);
        write_pod(os, cols);
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 static_cast<std::streamsize>(sizeof(float) * rows * cols));
    }
    if (!os) throw data_error("checkpoint write failed: " + path);
}

UNetDenoiser UNetDenoiser::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw data_error("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw data_error("unsupported checkpoint version " + std::to_string(version));
    std::uint8_t fam = 0;
    std::uint64_t iters = 0;
    ScheduleParams sched;
    UNetSpec spec;
    read_pod(is, fam);
    read_pod(is, iters);
    read_pod(is, sched.T);
    read_pod(is, sched.beta_start);
    read_pod(is, sched.beta_end);
    read_pod(is, sched.theta0);
    read_pod(is, spec.base_channels);
    read_pod(is, spec.time_dim);
    read_pod(is, spec.group_size);
    if (!is) throw data_error("truncated checkpoint: " + path);

    UNetDenoiser model(spec, fam == 0 ? NoiseFamily::Gamma : NoiseFamily::Gaussian, sched, 0);
    model.trained_iterations_ = iters;

    auto params = model.impl_->net.params();
    std::uint32_t n = 0;
    read_pod(is, n);
    if (n != params.size()) throw data_error("checkpoint tensor count mismatch: " + path);
    for (auto& p : params) {
        std::uint32_t len = 0;
        read_pod(is, len);
        std::string name(len, '\0');
        is.read(name.data(), len);
        std::int64_t rows = 0, cols = 0;
        read_pod(is, rows);
        read_pod(is, cols);
        if (!is || name != p.name || rows != p.value->rows() || cols != p.value->cols())
            throw data_error("checkpoint tensor '" + name + "' does not match the architecture");
        is.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(sizeof(float) * rows * cols));
    }
    if (!is) throw data_error("truncated checkpoint: " + path);
    return model;
}

// Training-side access to the private weights and counters.
struct TrainDriver {
    static nn::UNetNet<float>& net(UNetDenoiser& m) { return m.impl_->net; }
    static void add_iterations(UNetDenoiser& m, std::uint64_t n) { m.trained_iterations_ += n; }
};

TrainResult train_epsilon_model(const std::vector<ImageField>& dataset, const TrainConfig& cfg,
                                UNetDenoiser& model, const std::string& checkpoint_path,
                                std::ostream* loss_csv, const std::function<void(int, double)>& progress) {
    cfg.validate();
    if (dataset.empty()) throw data_error("train: dataset is empty");
    for (const auto& img : dataset) {
        require_domain(img, Domain::Normalized, "train dataset");
        if (img.height < cfg.crop_size || img.width < cfg.crop_size)
            throw data_error("train: image smaller than crop size");
    }
    if (cfg.noise_family != model.family())
        throw config_error("train: config noise family differs from the model's");

    const NoiseSchedule schedule = model.schedule_params().build();
    nn::UNetNet<float>& net = TrainDriver::net(model);
    const int S = cfg.crop_size;
    const long N = static_cast<long>(S) * S;

    nn::AdamW<float> opt;
    opt.lr = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    opt.init(net);

    nn::UNetGrads<float> grads;
    std::vector<nn::UNetCache<float>> caches(cfg.batch_size);
    ImageField crop(S, S, Domain::Normalized);

    TrainResult result;
    result.loss_log.reserve(cfg.iterations);
    if (loss_csv && loss_csv->tellp() == 0) *loss_csv << "iter,loss\n";

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        grads.zero_like(net);
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            SplitMix64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(iter - 1) *
                                                     cfg.batch_size + b));
            const ImageField& img = dataset[rng.next_u64() % dataset.size()];
            const int r0 = img.height == S ? 0 : static_cast<int>(rng.next_u64() %
                                                                  (img.height - S + 1));
            const int c0 = img.width == S ? 0 : static_cast<int>(rng.next_u64() %
                                                                 (img.width - S + 1));
            const bool flip = cfg.augment_hflip && (rng.next_u64() & 1);
            for (int r = 0; r < S; ++r)
                for (int c = 0; c < S; ++c) crop.at(r, c) = img.at(r0 + r, c0 + c);
            if (flip) {
                for (int r = 0; r < S; ++r)
                    for (int c = 0; c < S / 2; ++c) std::swap(crop.at(r, c), crop.at(r, S - 1 - c));
            }
            const int t = 1 + static_cast<int>(rng.next_u64() %
                                               static_cast<std::uint64_t>(schedule.T));
            const ForwardMarginal fm =
                forward_marginal(schedule, crop, t, rng.next_u64(), cfg.noise_family);

            nn::Mat<float> x(N, 1), target(N, 1);
            for (long i = 0; i < N; ++i) {
                x(i, 0) = static_cast<float>(fm.x_t.values[i]);
                target(i, 0) = static_cast<float>(fm.eps_true.values[i]);
            }
            nn::Mat<float> pred = nn::unet_forward(net, x, S, S, t, caches[b]);
            nn::Mat<float> diff = pred - target;
            loss_acc += static_cast<double>(diff.squaredNorm()) / N;
            nn::Mat<float> dy = diff * static_cast<float>(2.0 / (N * cfg.batch_size));
            nn::unet_backward(net, dy, caches[b], grads);
        }
        const double loss = loss_acc / cfg.batch_size;
        if (!std::isfinite(loss))
            throw numeric_error("train: non-finite loss at iteration " + std::to_string(iter));
        opt.step(net, grads);
        result.loss_log.emplace_back(iter, loss);
        if (loss_csv) *loss_csv << iter << ',' << loss << '\n';
        if (progress) progress(iter, loss);
        if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            iter % cfg.checkpoint_every == 0 && iter != cfg.iterations) {
            TrainDriver::add_iterations(model, cfg.checkpoint_every);
            model.save_checkpoint(checkpoint_path);
        }
    }
    // trained_iterations counts total, including any intermediate checkpoints
    const std::uint64_t already =
        cfg.checkpoint_every > 0 && !checkpoint_path.empty()
            ? static_cast<std::uint64_t>((cfg.iterations - 1) / cfg.checkpoint_every) *
                  cfg.checkpoint_every
            : 0;
    TrainDriver::add_iterations(model, cfg.iterations - already);
    if (!checkpoint_path.empty()) model.save_checkpoint(checkpoint_path);
    return result;
}

std::vector<double> predict_noise(DenoiserBackend& backend, const ImageField& x_t, int t) {
    require_domain(x_t, Domain::Normalized, "predict_noise");
    std::vector<double> eps = backend.predict(x_t, t);
    if (eps.size() != x_t.size()) throw config_error("predict_noise: backend shape mismatch");
    return eps;
}

}  // namespace gard
