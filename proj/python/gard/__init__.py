"""Gamma-diffusion speckle removal: Python surface over the C++ core."""

try:
    from . import _gard as _impl  # installed layout: gard/_gard.so
except ImportError:  # build-tree layout: _gard.so on PYTHONPATH
    import _gard as _impl

ConfigError = _impl.ConfigError
DataError = _impl.DataError
NumericError = _impl.NumericError
Denoiser = _impl.Denoiser

schedule_table = _impl.schedule_table
sample_gamma = _impl.sample_gamma
forward_marginal = _impl.forward_marginal
forward_step = _impl.forward_step
estimate_noise_std = _impl.estimate_noise_std
nlm = _impl.nlm
nrft = _impl.nrft
ddim_denoise = _impl.ddim_denoise
generate_phantom = _impl.generate_phantom
to_display = _impl.to_display
apply_speckle = _impl.apply_speckle
to_normalized = _impl.to_normalized
to_raw = _impl.to_raw
mse = _impl.mse
psnr = _impl.psnr
ssim = _impl.ssim
wilcoxon = _impl.wilcoxon

_VARIANT_FAMILY_FIDELITY = {
    "gard": ("gamma", "nrft"),
    "ddgm": ("gamma", "none"),
    "ddgm+cpdm": ("gamma", "raw"),
    "ddpm": ("gaussian", "none"),
    "ddpm+cpdm": ("gaussian", "raw"),
    "ddpm+nrft": ("gaussian", "nrft"),
}


def denoise_pipeline(raw, model=None, variant="gard", t_start=70, stride=10, mu=10.0,
                     patch_radius=2, search_radius=7, h=0.0, noise_std=0.0):
    """Full denoise path on a 0-255 image, matching the CLI variant semantics.

    Returns the denoised image on the 0-255 scale. ``nlm-only`` needs no model;
    the diffusion variants need a trained ``Denoiser`` of the matching family.
    """
    y = to_normalized(raw)
    if variant == "nlm-only":
        out = nlm(y, patch_radius=patch_radius, search_radius=search_radius,
                  h=h, noise_std=noise_std)
        return to_raw(out)
    if variant not in _VARIANT_FAMILY_FIDELITY:
        raise ValueError(f"unknown variant '{variant}'")
    family, fidelity = _VARIANT_FAMILY_FIDELITY[variant]
    if model is None:
        raise ValueError(f"variant '{variant}' needs a trained model")
    if model.family != family:
        raise ValueError(
            f"model family '{model.family}' does not match variant '{variant}'")
    guide = None
    if fidelity == "nrft":
        guide = nlm(y, patch_radius=patch_radius, search_radius=search_radius,
                    h=h, noise_std=noise_std)
    elif fidelity == "raw":
        guide = y
    out = ddim_denoise(y, model, t_start=t_start, stride=stride,
                       fidelity=fidelity, mu=mu, guide=guide)
    return to_raw(out)


__all__ = [
    "ConfigError", "DataError", "NumericError", "Denoiser",
    "schedule_table", "sample_gamma", "forward_marginal", "forward_step",
    "estimate_noise_std", "nlm", "nrft", "ddim_denoise",
    "generate_phantom", "to_display", "apply_speckle",
    "to_normalized", "to_raw", "mse", "psnr", "ssim", "wilcoxon",
    "denoise_pipeline",
]
