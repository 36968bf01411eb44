#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gard/sampler.hpp"
#include "gard/schedule.hpp"
#include "gard/types.hpp"

namespace gard {

// Inputs that a schedule was built from; stored in checkpoints so a model is
// never run against a different schedule than it was trained with.
struct ScheduleParams {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double theta0 = 0.1;

    NoiseSchedule build() const { return build_linear_schedule(T, beta_start, beta_end, theta0); }
    bool operator==(const ScheduleParams&) const = default;
};

// The epsilon_theta contract: maps (noisy field, timestep) to the predicted
// standardized noise, same shape as the input. Implementations must be safe to
// call from multiple threads on disjoint images (read-only weights).
class DenoiserBackend {
  public:
    virtual ~DenoiserBackend() = default;
    virtual std::vector<double> predict(const ImageField& x_t, int t) = 0;
};

// Verification backend: knows the true x0 and returns the exact standardized
// noise (x_t - sqrt(alpha_bar_t)*x0) / sqrt(1 - alpha_bar_t).
class OracleBackend : public DenoiserBackend {
  public:
    OracleBackend(NoiseSchedule schedule, ImageField x0)
        : schedule_(std::move(schedule)), x0_(std::move(x0)) {}
    std::vector<double> predict(const ImageField& x_t, int t) override;

  private:
    NoiseSchedule schedule_;
    ImageField x0_;
};

struct UNetSpec {
    int base_channels = 16;  // widths (base, 2*base, 4*base)
    int time_dim = 32;
    int group_size = 8;  // channels per GroupNorm group

    bool operator==(const UNetSpec&) const = default;
};

// Small time-conditioned convolutional U-Net (3 levels, two convs per level,
// group norm, SiLU, skip connections, sinusoidal timestep embedding projected
// per level). Weights are float; the public surface stays double.
class UNetDenoiser : public DenoiserBackend {
  public:
    UNetDenoiser(const UNetSpec& spec, NoiseFamily family, const ScheduleParams& schedule,
                 std::uint64_t init_seed);
    ~UNetDenoiser() override;
    UNetDenoiser(UNetDenoiser&&) noexcept;
    UNetDenoiser& operator=(UNetDenoiser&&) noexcept;

    std::vector<double> predict(const ImageField& x_t, int t) override;

    const UNetSpec& spec() const { return spec_; }
    NoiseFamily family() const { return family_; }
    const ScheduleParams& schedule_params() const { return schedule_params_; }
    std::uint64_t trained_iterations() const { return trained_iterations_; }

    // Single-file binary checkpoint with an embedded version tag, the noise
    // family, the schedule parameters and all weights.
    void save_checkpoint(const std::string& path) const;
    static UNetDenoiser load_checkpoint(const std::string& path);

    struct Impl;
    Impl& impl() { return *impl_; }

  private:
    UNetDenoiser();
    UNetSpec spec_;
    NoiseFamily family_ = NoiseFamily::Gamma;
    ScheduleParams schedule_params_;
    std::uint64_t trained_iterations_ = 0;
    std::unique_ptr<Impl> impl_;

    friend struct TrainDriver;
};

struct TrainConfig {
    int iterations = 20000;
    int batch_size = 8;
    double learning_rate = 3e-4;
    double weight_decay = 1e-4;
    NoiseFamily noise_family = NoiseFamily::Gamma;
    bool augment_hflip = true;
    int checkpoint_every = 0;  // 0 = only write the final checkpoint
    std::uint64_t seed = 0;
    int crop_size = 64;

    void validate() const;  // throws config_error
};

struct TrainResult {
    std::vector<std::pair<int, double>> loss_log;  // (iteration, batch MSE), 1-based
};

// AdamW training of the epsilon model on clean normalized images: draw a
// batch of crops, a uniform t in [1,T], build x_t and the standardized noise
// target from the closed-form forward process, minimize MSE.
// checkpoint_path == "" disables checkpointing; loss_csv, if non-null,
// receives "iter,loss" rows; progress, if set, is called every iteration.
TrainResult train_epsilon_model(const std::vector<ImageField>& dataset, const TrainConfig& cfg,
                                UNetDenoiser& model, const std::string& checkpoint_path = "",
                                std::ostream* loss_csv = nullptr,
                                const std::function<void(int, double)>& progress = nullptr);

// Shape-checked call through the backend contract.
std::vector<double> predict_noise(DenoiserBackend& backend, const ImageField& x_t, int t);

}  // namespace gard
