"""Single table of numerical defaults shared by the library and the CLI."""

DEFAULTS = {
    "dt": 1e-3,
    "t_final": 100.0,
    "eps_offset": 1e-6,
    "alpha_scale": 1.0,
    "alpha_offset": 0.0,
    "alpha_exponent": 0.8,
    "tol": 1e-10,
    "delta": 1.0,
    "iterations": 2_000_000,
    "seed": 0,
    "vi_tol": 1e-12,
    "vi_max_iter": 1_000_000,
    "stationary_tol": 1e-12,
    "policy_cap": 1_000_000,
    "theta_phi_samples": 10_000,
    "melo_tol": 1e-10,
    "sandwich_tol": 1e-7,
}


def format_defaults() -> str:
    width = max(len(k) for k in DEFAULTS)
    return "\n".join(f"  {k:<{width}}  {v!r}" for k, v in DEFAULTS.items())
