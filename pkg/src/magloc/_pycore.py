"""Pure-NumPy Monte Carlo kernel (fallback for the compiled ``_core``).

Both kernels share one contract; see ``magloc.core.KernelPlan`` for the
plan fields and ``simulate_block`` for the per-voxel outputs.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def _rotation_matrices(u):
    # Shoemake uniform quaternion -> rotation matrix, batched
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    a = np.sqrt(1.0 - u1)
    b = np.sqrt(u1)
    t2 = TWO_PI * u2
    t3 = TWO_PI * u3
    w = b * np.cos(t3)
    x = a * np.sin(t2)
    y = a * np.cos(t2)
    z = b * np.sin(t3)
    m = np.empty(u.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - z * w)
    m[..., 0, 2] = 2 * (x * z + y * w)
    m[..., 1, 0] = 2 * (x * y + z * w)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - x * w)
    m[..., 2, 0] = 2 * (x * z - y * w)
    m[..., 2, 1] = 2 * (y * z + x * w)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def simulate_block(positions, fields, uniforms, plan):
    """Run every Monte Carlo draw for a block of voxels.

    positions: (N, 3) true voxel positions.
    fields:    (N, W, 3) noiseless world-frame field of each wire.
    uniforms:  (N, R, 6 + 3W) U[0, 1) draws; per run the layout is
               rotation (3), residual (3), then three per wire.

    Returns ``(means, saturated_runs, failed_runs)`` where ``means`` is
    (N, 4): mean position error and mean |x|, |y|, |z| errors over the
    runs that produced a finite estimate (NaN if none did).
    """
    positions = np.asarray(positions, dtype=np.float64)
    fields = np.asarray(fields, dtype=np.float64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    n, runs, _ = uniforms.shape
    nw = fields.shape[1]

    rot = _rotation_matrices(uniforms[..., 0:3])
    resid = np.zeros((n, runs, 3))
    resid[..., plan.perm] = plan.bounds * (2.0 * uniforms[..., 3:6] - 1.0)

    world = fields[:, None, :, :] + resid[:, :, None, :]
    # sensor components s_j = sum_i M_ij v_i
    comps = np.einsum("nrwi,nrij->nrwj", world, rot)
    sat = np.any(np.abs(comps) > plan.range_max, axis=(2, 3))
    noise = uniforms[..., 6:].reshape(n, runs, nw, 3)
    if plan.noise_basis == 0:
        noisy = comps + plan.rel_error * np.abs(comps) * (2.0 * noise - 1.0)
        np.clip(noisy, -plan.range_max, plan.range_max, out=noisy)
        mag = np.sqrt(np.einsum("nrwj,nrwj->nrw", noisy, noisy))
    else:
        np.clip(comps, -plan.range_max, plan.range_max, out=comps)
        mag = np.sqrt(np.einsum("nrwj,nrwj->nrw", comps, comps))
        mag = mag * (1.0 + plan.rel_error * (2.0 * noise[..., 0] - 1.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        dist = plan.mu * plan.currents / TWO_PI / mag
        bad = ~(mag > 0) | ~np.isfinite(mag)
        est = _laterate(dist, plan)
    err = est - positions[:, None, :]
    aerr = np.abs(err)
    perr = np.sqrt(err[..., 0] ** 2 + err[..., 1] ** 2 + err[..., 2] ** 2)
    ok = ~np.any(bad, axis=2) & np.isfinite(perr)

    sums = np.zeros((n, 4))
    count = np.zeros(n, dtype=np.int64)
    for r in range(runs):
        okr = ok[:, r]
        sums[okr, 0] += perr[okr, r]
        sums[okr, 1:] += aerr[okr, r]
        count += okr
    with np.errstate(invalid="ignore"):
        means = sums / count[:, None]
    means[count == 0] = np.nan
    return means, sat.sum(axis=1).astype(np.int64), (runs - count).astype(np.int64)


def _laterate(dist, plan):
    shape = dist.shape[:-1]
    if plan.mode == 0:
        ix, iy, iz = plan.tri_index
        x2 = dist[..., ix] ** 2
        y2 = dist[..., iy] ** 2
        z2 = dist[..., iz] ** 2
        est = np.empty(shape + (3,))
        est[..., 0] = np.sqrt(np.maximum(0.0, 0.5 * (z2 + y2 - x2)))
        est[..., 1] = np.sqrt(np.maximum(0.0, 0.5 * (x2 + z2 - y2)))
        est[..., 2] = np.sqrt(np.maximum(0.0, 0.5 * (x2 + y2 - z2)))
        return est + plan.corner

    sums = np.zeros(shape + (3,))
    weights = np.zeros(3)
    for f in range(3):
        k = plan.fam_k[f]
        if k == 0:
            continue
        d2 = dist[..., plan.fam_idx[f, :k]] ** 2
        rhs = d2[..., :1] - d2[..., 1:] + plan.fam_const[f, : k - 1]
        ca = rhs @ plan.fam_pinv[f, 0, : k - 1]
        cb = rhs @ plan.fam_pinv[f, 1, : k - 1]
        ia, ib = plan.plane[f]
        wgt = plan.fam_weight[f]
        sums[..., ia] += wgt * ca
        sums[..., ib] += wgt * cb
        weights[ia] += wgt
        weights[ib] += wgt
    return sums / weights
