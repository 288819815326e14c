"""Default settings of fresco runs."""

fresco = {
    "msr": {
        "R": 3,
        "L_H": 2,
        "L_M": 3,
        "lambda_lr": 1e-3,
        "lambda_sto": 1e-3,
        "lambda_tv": 1e-3,
        "p": 0.5,
        "q": 0.5,
        "tau": 1.0,
        "epsilon": 1e-3,
        "max_iters": 1000,
        "rel_tol": 1e-6,
        "step_rule": "backtracking",
        "step_size": 1e-3,
        "beta": 0.5,
        "armijo": 1e-4,
        "seed": 0,
    },
    "hsr": {
        "lambda_inv": 10.0,
        "lambda_scale": 15.0,
        "batch": 8,
        "t_max": 4000,
        "lr0": 1e-4,
        "beta1": 0.5,
        "beta2": 0.999,
        "rotate": True,
        "log_every": 100,
        "seed": 0,
    },
    "pm": {
        "omega": "banded",
        "max_iters": 2000,
        "step_size": 1.0,
        "rel_tol": 1e-12,
        "seed": 0,
    },
    "scene": {
        "kind": "scene",
        "source_rows": 96,
        "source_cols": 96,
        "bands": 20,
        "msi_bands": 4,
        "materials": 3,
        "scale": 4,
        "spatial_kind": "gaussian",
        "kernel_size": 5,
        "sigma": 1.7,
        "msi_row": 16,
        "msi_col": 16,
        "msi_size": 48,
        "hsi_row": 16,
        "hsi_col": 16,
        "hsi_size": 48,
        "shift_t": 8,
        "hsi_rotation_deg": 0.0,
        "msi_rotation_deg": 0.0,
        "noise_sigma": 0.0,
        "latent_dim": 4,
    },
    "net": {
        "scale": 4,
        "patch_side": 8,
        "R": 3,
        "base_width": 8,
        "depth": 4,
        "batch_norm": True,
        "slope": 0.2,
        "res_blocks": 2,
    },
}
