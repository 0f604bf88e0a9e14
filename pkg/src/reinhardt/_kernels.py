"""Hot loops: fixed-step RK4 integrators and the half-plane geometry sweep.

The functions here are written in the subset of Python that numba's nopython
mode accepts, operating on flat float64/complex128 arrays.  ``_backend``
compiles them with ``numba.njit`` or hands them out unchanged, depending on
the ``REINHARDT_BACKEND`` environment variable.  The sweep has a separate
vectorised numpy implementation because a Python loop over 10^6 points is
too slow to be a useful fallback.

Extended state layout (length 14):
    0-3   g11 g12 g21 g22
    4-6   X   (a, b, c)
    7-9   L1  (a, b, c)
    10-12 LR  (a, b, c)
    13    accumulated cost

Policy modes:
    0  constant control matrix params[0:3]
    1  closed-loop maximisation over the simplex vertices
    2  closed-loop maximisation over a disk boundary, alpha = params[3], beta = params[4]
"""

import math

import numpy as np

SQRT3 = math.sqrt(3.0)
STATE_SIZE = 14
RECORD_SIZE = 1 + STATE_SIZE + 3
STAR_TOL = 1e-14

# Control matrices of the simplex vertices e0, e1, e2, as (a, b, c).
VERTEX_Z = np.array(
    [
        [0.0, 1.0 / 3.0, 1.0],
        [1.0 / SQRT3, -2.0 / 3.0, 0.0],
        [-1.0 / SQRT3, -2.0 / 3.0, 0.0],
    ]
)


def tform(a1, b1, c1, a2, b2, c2):
    return 2.0 * a1 * a2 + b1 * c2 + c1 * b2


def control_hamiltonian(s, za, zb, zc, lam):
    """Hamiltonian of the extended state s for the control matrix Z."""
    xa, xb, xc = s[4], s[5], s[6]
    # L1 - (3/2) lam J with J = (0, -1, 1)
    la, lb, lc = s[7], s[8] + 1.5 * lam, s[9] - 1.5 * lam
    first = tform(la, lb, lc, xa, xb, xc)
    xz = tform(xa, xb, xc, za, zb, zc)
    return first - tform(s[10], s[11], s[12], za, zb, zc) / xz


def disk_control(s, alpha, beta, lam, out):
    """Maximising boundary control for the disk (alpha, beta); writes Z into out.

    The critical points of the control-dependent Hamiltonian on the boundary
    circle are the two roots of a quadratic built from [LR, X] in su(1,1)
    coordinates.  Both are evaluated and the larger Hamiltonian wins.  When the
    quadratic degenerates the circle is sampled instead.  Returns the angle
    of the chosen boundary point.
    """
    xa, xb, xc = s[4], s[5], s[6]
    ra, rb, rc = s[10], s[11], s[12]
    # M = [LR, X]
    ma = rb * xc - rc * xb
    mb = 2.0 * (ra * xb - rb * xa)
    mc = 2.0 * (rc * xa - ra * xc)
    delta = 0.5 * (mc - mb)
    pr = 0.5 * (mb + mc)
    pi_ = ma
    pabs2 = pr * pr + pi_ * pi_
    disc = alpha * alpha * pabs2 - beta * beta * delta * delta
    best_val = -1e300
    best_theta = 0.0
    scale = abs(delta) + math.sqrt(pabs2)
    if alpha * math.sqrt(pabs2) > 1e-13 * (scale + 1e-300) and disc >= 0.0 and beta > 0.0:
        sq = math.sqrt(disc)
        # z = (beta*delta +/- i sq) / (alpha * conj(p)),  1/conj(p) = p/|p|^2
        for sgn in (1.0, -1.0):
            nr = beta * delta
            ni = sgn * sq
            # (nr + i ni) * (pr + i pi_) / (alpha |p|^2)
            zr = (nr * pr - ni * pi_) / (alpha * pabs2)
            zi = (nr * pi_ + ni * pr) / (alpha * pabs2)
            theta = math.atan2(zi, zr)
            qa = beta * math.sin(theta)
            qr = beta * math.cos(theta)
            val = control_hamiltonian(s, qa, qr - alpha, qr + alpha, lam)
            if val > best_val:
                best_val = val
                best_theta = theta
    else:
        n = 720
        for k in range(n):
            theta = 2.0 * math.pi * k / n
            qa = beta * math.sin(theta)
            qr = beta * math.cos(theta)
            val = control_hamiltonian(s, qa, qr - alpha, qr + alpha, lam)
            if val > best_val:
                best_val = val
                best_theta = theta
    qa = beta * math.sin(best_theta)
    qr = beta * math.cos(best_theta)
    out[0] = qa
    out[1] = qr - alpha
    out[2] = qr + alpha
    return best_theta


def select_control(s, mode, params, lam, out):
    if mode == 0:
        out[0] = params[0]
        out[1] = params[1]
        out[2] = params[2]
    elif mode == 1:
        best = -1e300
        for v in range(3):
            val = control_hamiltonian(s, VERTEX_Z[v, 0], VERTEX_Z[v, 1], VERTEX_Z[v, 2], lam)
            if val > best:
                best = val
                out[0] = VERTEX_Z[v, 0]
                out[1] = VERTEX_Z[v, 1]
                out[2] = VERTEX_Z[v, 2]
    else:
        disk_control(s, params[3], params[4], lam, out)


def reinhardt_rhs(s, za, zb, zc, lam, ds):
    """State-costate vector field.  Returns <X, Z>; the caller checks its sign."""
    g11, g12, g21, g22 = s[0], s[1], s[2], s[3]
    xa, xb, xc = s[4], s[5], s[6]
    la, lb, lc = s[7], s[8], s[9]
    ra, rb, rc = s[10], s[11], s[12]
    xz = tform(xa, xb, xc, za, zb, zc)
    if abs(xz) < STAR_TOL:
        for i in range(STATE_SIZE):
            ds[i] = 0.0
        return xz
    pa, pb, pc = za / xz, zb / xz, zc / xz
    ds[0] = g11 * xa + g12 * xc
    ds[1] = g11 * xb - g12 * xa
    ds[2] = g21 * xa + g22 * xc
    ds[3] = g21 * xb - g22 * xa
    # [P, X]
    pxa = pb * xc - pc * xb
    pxb = 2.0 * (pa * xb - pb * xa)
    pxc = 2.0 * (pc * xa - pa * xc)
    ds[4] = pxa
    ds[5] = pxb
    ds[6] = pxc
    # [L1, X]
    ds[7] = lb * xc - lc * xb
    ds[8] = 2.0 * (la * xb - lb * xa)
    ds[9] = 2.0 * (lc * xa - la * xc)
    # [P, LR] - <LR, P>[P, X] + [-L1 + 1.5 lam J, X]
    lrp = tform(ra, rb, rc, pa, pb, pc)
    qa, qb, qc = -la, -lb - 1.5 * lam, -lc + 1.5 * lam
    ds[10] = (pb * rc - pc * rb) - lrp * pxa + (qb * xc - qc * xb)
    ds[11] = 2.0 * (pa * rb - pb * ra) - lrp * pxb + 2.0 * (qa * xb - qb * xa)
    ds[12] = 2.0 * (pc * ra - pa * rc) - lrp * pxc + 2.0 * (qc * xa - qa * xc)
    ds[13] = 1.5 * (xc - xb)
    return xz


def renormalize(s):
    """Rescale X and g to determinant one and project LR onto the complement of X."""
    dx = -s[4] * s[4] - s[5] * s[6]
    if dx > 0.0:
        f = 1.0 / math.sqrt(dx)
        s[4] *= f
        s[5] *= f
        s[6] *= f
    dg = s[0] * s[3] - s[1] * s[2]
    if dg > 0.0:
        f = 1.0 / math.sqrt(dg)
        for i in range(4):
            s[i] *= f
    xx = tform(s[4], s[5], s[6], s[4], s[5], s[6])
    rx = tform(s[10], s[11], s[12], s[4], s[5], s[6])
    if xx != 0.0:
        f = rx / xx
        s[10] -= f * s[4]
        s[11] -= f * s[5]
        s[12] -= f * s[6]


def rk4_extended(s0, mode, params, lam, t0, h, nsteps, renorm_every, record_every):
    """Fixed-step RK4 for the extended state under the given policy.

    Returns (records, nrec, status, steps_done).  status is 0 on success and 1
    if <X, Z> stopped being negative (the trajectory left the star domain).
    Each record row holds t, the 14 state entries and the control matrix used
    at the start of the step.
    """
    nrec_max = nsteps // record_every + 2
    rec = np.zeros((nrec_max, RECORD_SIZE))
    s = s0.copy()
    tmp = np.zeros(STATE_SIZE)
    k1 = np.zeros(STATE_SIZE)
    k2 = np.zeros(STATE_SIZE)
    k3 = np.zeros(STATE_SIZE)
    k4 = np.zeros(STATE_SIZE)
    z = np.zeros(3)
    nrec = 0
    status = 0
    t = t0
    step = 0
    while step < nsteps:
        select_control(s, mode, params, lam, z)
        if step % record_every == 0:
            rec[nrec, 0] = t
            for i in range(STATE_SIZE):
                rec[nrec, 1 + i] = s[i]
            rec[nrec, 15] = z[0]
            rec[nrec, 16] = z[1]
            rec[nrec, 17] = z[2]
            nrec += 1
        xz = reinhardt_rhs(s, z[0], z[1], z[2], lam, k1)
        if xz > -STAR_TOL:
            status = 1
            break
        for i in range(STATE_SIZE):
            tmp[i] = s[i] + 0.5 * h * k1[i]
        select_control(tmp, mode, params, lam, z)
        xz = reinhardt_rhs(tmp, z[0], z[1], z[2], lam, k2)
        if xz > -STAR_TOL:
            status = 1
            break
        for i in range(STATE_SIZE):
            tmp[i] = s[i] + 0.5 * h * k2[i]
        select_control(tmp, mode, params, lam, z)
        xz = reinhardt_rhs(tmp, z[0], z[1], z[2], lam, k3)
        if xz > -STAR_TOL:
            status = 1
            break
        for i in range(STATE_SIZE):
            tmp[i] = s[i] + h * k3[i]
        select_control(tmp, mode, params, lam, z)
        xz = reinhardt_rhs(tmp, z[0], z[1], z[2], lam, k4)
        if xz > -STAR_TOL:
            status = 1
            break
        for i in range(STATE_SIZE):
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        step += 1
        t = t0 + step * h
        if renorm_every > 0 and step % renorm_every == 0:
            renormalize(s)
    if status == 0:
        select_control(s, mode, params, lam, z)
        rec[nrec, 0] = t
        for i in range(STATE_SIZE):
            rec[nrec, 1 + i] = s[i]
        rec[nrec, 15] = z[0]
        rec[nrec, 16] = z[1]
        rec[nrec, 17] = z[2]
        nrec += 1
    return rec, nrec, status, step


def fuller_rhs(z, gamma, dz):
    n = z.shape[0]
    m = abs(z[n - 1])
    dz[0] = gamma * z[n - 1] / m
    for k in range(1, n):
        dz[k] = z[k - 1]


def rk4_fuller(z0, gamma, h, nsteps, record_every):
    """RK4 for the chain z_k' = z_{k-1}, z_1' = gamma z_n / |z_n| (index 0 is z_1)."""
    n = z0.shape[0]
    nrec_max = nsteps // record_every + 2
    rec = np.zeros((nrec_max, n), dtype=np.complex128)
    times = np.zeros(nrec_max)
    z = z0.copy()
    tmp = np.zeros(n, dtype=np.complex128)
    k1 = np.zeros(n, dtype=np.complex128)
    k2 = np.zeros(n, dtype=np.complex128)
    k3 = np.zeros(n, dtype=np.complex128)
    k4 = np.zeros(n, dtype=np.complex128)
    nrec = 0
    for step in range(nsteps):
        if step % record_every == 0:
            times[nrec] = step * h
            for i in range(n):
                rec[nrec, i] = z[i]
            nrec += 1
        fuller_rhs(z, gamma, k1)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * h * k1[i]
        fuller_rhs(tmp, gamma, k2)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * h * k2[i]
        fuller_rhs(tmp, gamma, k3)
        for i in range(n):
            tmp[i] = z[i] + h * k3[i]
        fuller_rhs(tmp, gamma, k4)
        for i in range(n):
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    times[nrec] = nsteps * h
    for i in range(n):
        rec[nrec, i] = z[i]
    nrec += 1
    return times[:nrec], rec[:nrec]


def abnormal_rhs(y, ka, kb, kc, dy):
    """LR' = [LR - K, X],  X' = -[LR, X] / sqrt(2 <LR, LR>).  y = (X, LR)."""
    xa, xb, xc = y[0], y[1], y[2]
    ra, rb, rc = y[3], y[4], y[5]
    w = math.sqrt(2.0 * tform(ra, rb, rc, ra, rb, rc))
    ma = rb * xc - rc * xb
    mb = 2.0 * (ra * xb - rb * xa)
    mc = 2.0 * (rc * xa - ra * xc)
    dy[0] = -ma / w
    dy[1] = -mb / w
    dy[2] = -mc / w
    da, db, dc = ra - ka, rb - kb, rc - kc
    dy[3] = db * xc - dc * xb
    dy[4] = 2.0 * (da * xb - db * xa)
    dy[5] = 2.0 * (dc * xa - da * xc)


def rk4_abnormal(y0, k, h, nsteps):
    out = np.zeros((nsteps + 1, 6))
    y = y0.copy()
    tmp = np.zeros(6)
    k1 = np.zeros(6)
    k2 = np.zeros(6)
    k3 = np.zeros(6)
    k4 = np.zeros(6)
    for i in range(6):
        out[0, i] = y[i]
    for step in range(nsteps):
        abnormal_rhs(y, k[0], k[1], k[2], k1)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        abnormal_rhs(tmp, k[0], k[1], k[2], k2)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        abnormal_rhs(tmp, k[0], k[1], k[2], k3)
        for i in range(6):
            tmp[i] = y[i] + h * k3[i]
        abnormal_rhs(tmp, k[0], k[1], k[2], k4)
        for i in range(6):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            out[step + 1, i] = y[i]
    return out


# ---------------------------------------------------------------------------
# Half-plane geometry sweep
# ---------------------------------------------------------------------------

def _region_polys(x, y):
    x2 = x * x
    y2 = y * y
    p0 = 3.0 * x2 * x + 3.0 * x * y2 - 7.0 * SQRT3 * x2 + SQRT3 * y2 + 15.0 * x - 3.0 * SQRT3
    p1 = -3.0 * x2 * x2 - 3.0 * y2 * y2 - 6.0 * x2 * y2 + x2 + 2.0 * y2
    p2 = -3.0 * x2 * x - 3.0 * x * y2 - 7.0 * SQRT3 * x2 + SQRT3 * y2 - 15.0 * x - 3.0 * SQRT3
    return p0, p1, p2


def geometry_sweep_loop(xs, ys, out):
    """Per-point triangle areas, region membership and the exclusion bound.

    out columns: T0 T1 T2 A0 A1 A2 in_h0 in_h1 in_h2 E.
    """
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        al = (1.0 + SQRT3 * x) / y
        be = (1.0 - SQRT3 * x) / y
        ga = (3.0 * x * x + 3.0 * y * y - 1.0) / (2.0 * y)
        t0 = al * ga / (4.0 * SQRT3)
        t1 = al * be / (4.0 * SQRT3)
        t2 = be * ga / (4.0 * SQRT3)
        a0 = al * al / SQRT3
        a1 = be * be / SQRT3
        a2 = ga * ga / SQRT3
        p0, p1, p2 = _region_polys(x, y)
        h0 = 1.0 if p0 >= 0.0 else 0.0
        h1 = 1.0 if p1 >= 0.0 else 0.0
        h2 = 1.0 if p2 >= 0.0 else 0.0
        area = 0.0
        if h0 > 0.0:
            area += t0 - math.sqrt(max(a1 * t0, 0.0))
        if h1 > 0.0:
            area += t1 - math.sqrt(max(a2 * t1, 0.0))
        if h2 > 0.0:
            area += t2 - math.sqrt(max(a0 * t2, 0.0))
        e = 0.75 + area / SQRT3
        if e < 0.0:
            e = 0.0
        if e > 1.0:
            e = 1.0
        out[i, 0] = t0
        out[i, 1] = t1
        out[i, 2] = t2
        out[i, 3] = a0
        out[i, 4] = a1
        out[i, 5] = a2
        out[i, 6] = h0
        out[i, 7] = h1
        out[i, 8] = h2
        out[i, 9] = e


def geometry_sweep_numpy(xs, ys):
    """Vectorised numpy twin of :func:`geometry_sweep_loop`."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    al = (1.0 + SQRT3 * xs) / ys
    be = (1.0 - SQRT3 * xs) / ys
    ga = (3.0 * xs * xs + 3.0 * ys * ys - 1.0) / (2.0 * ys)
    t = np.stack([al * ga, al * be, be * ga]) / (4.0 * SQRT3)
    a = np.stack([al * al, be * be, ga * ga]) / SQRT3
    polys = np.stack(_region_polys(xs, ys))
    hits = polys >= 0.0
    a_next = np.roll(a, -1, axis=0)
    areas = np.where(hits, t - np.sqrt(np.maximum(a_next * t, 0.0)), 0.0)
    e = np.clip(0.75 + areas.sum(axis=0) / SQRT3, 0.0, 1.0)
    return np.column_stack([t.T, a.T, hits.T.astype(float), e])
