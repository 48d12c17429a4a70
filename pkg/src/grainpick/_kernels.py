"""Numba kernels for the quasi-static contact solver.

Everything here operates on plain float64 arrays so the Gauss-Seidel sweeps
stay allocation-free and deterministic (no fastmath, fixed pair order).
The object is encoded as kind 1 = disc, 2 = polygon; polygons are passed as
world-frame vertices that the kernel keeps in sync with the pose it mutates.
"""

import numpy as np
from numba import njit

OBJ_DISC = 1
OBJ_POLY = 2


@njit(cache=True)
def poly_to_world(verts_body, pose, out):
    c, s = np.cos(pose[2]), np.sin(pose[2])
    for i in range(verts_body.shape[0]):
        x, y = verts_body[i, 0], verts_body[i, 1]
        out[i, 0] = pose[0] + c * x - s * y
        out[i, 1] = pose[1] + s * x + c * y


@njit(cache=True)
def point_in_poly(px, py, verts):
    """Crossing-number test; works for any simple polygon."""
    inside = False
    n = verts.shape[0]
    j = n - 1
    for i in range(n):
        xi, yi = verts[i, 0], verts[i, 1]
        xj, yj = verts[j, 0], verts[j, 1]
        if (yi > py) != (yj > py):
            t = (py - yi) / (yj - yi)
            if px < xi + t * (xj - xi):
                inside = not inside
        j = i
    return inside


@njit(cache=True)
def closest_on_poly(px, py, verts):
    """Closest boundary point to (px, py) over all edges."""
    best_d2 = 1e30
    bx = by = 0.0
    n = verts.shape[0]
    for i in range(n):
        ax, ay = verts[i, 0], verts[i, 1]
        cx, cy = verts[(i + 1) % n, 0], verts[(i + 1) % n, 1]
        ex, ey = cx - ax, cy - ay
        ee = ex * ex + ey * ey
        if ee > 0.0:
            t = ((px - ax) * ex + (py - ay) * ey) / ee
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        qx, qy = ax + t * ex, ay + t * ey
        d2 = (px - qx) ** 2 + (py - qy) ** 2
        if d2 < best_d2:
            best_d2 = d2
            bx, by = qx, qy
    return bx, by, np.sqrt(best_d2)


@njit(cache=True)
def circle_poly_contact(px, py, r, verts):
    """Penetration of a circle against a simple polygon.

    Returns (pen, nx, ny, qx, qy): pen <= 0 means no contact; (nx, ny) is the
    unit direction the circle must move to separate; (qx, qy) is the contact
    point on the polygon boundary.
    """
    qx, qy, d = closest_on_poly(px, py, verts)
    if point_in_poly(px, py, verts):
        if d > 1e-12:
            nx, ny = (qx - px) / d, (qy - py) / d
        else:
            nx, ny = 1.0, 0.0
        return r + d, nx, ny, qx, qy
    if d >= r:
        return 0.0, 0.0, 0.0, qx, qy
    if d > 1e-12:
        nx, ny = (px - qx) / d, (py - qy) / d
    else:
        nx, ny = 1.0, 0.0
    return r - d, nx, ny, qx, qy


@njit(cache=True)
def circle_object_contact(px, py, r, obj_kind, obj_pose, obj_r, obj_verts):
    """Contact of a circle against the rigid object (disc or polygon)."""
    if obj_kind == OBJ_DISC:
        dx, dy = px - obj_pose[0], py - obj_pose[1]
        d = np.sqrt(dx * dx + dy * dy)
        pen = obj_r + r - d
        if pen <= 0.0:
            return 0.0, 0.0, 0.0, 0.0, 0.0
        if d > 1e-12:
            nx, ny = dx / d, dy / d
        else:
            nx, ny = 1.0, 0.0
        qx, qy = obj_pose[0] + nx * obj_r, obj_pose[1] + ny * obj_r
        return pen, nx, ny, qx, qy
    return circle_poly_contact(px, py, r, obj_verts)


@njit(cache=True)
def build_particle_pairs(parts, cell, nx, ny, x0, y0, cutoff, head, nxt, pairs):
    """Uniform-grid broad phase; returns number of candidate pairs."""
    n = parts.shape[0]
    for i in range(nx * ny):
        head[i] = -1
    for i in range(n):
        cxi = int((parts[i, 0] - x0) / cell)
        cyi = int((parts[i, 1] - y0) / cell)
        if cxi < 0:
            cxi = 0
        elif cxi >= nx:
            cxi = nx - 1
        if cyi < 0:
            cyi = 0
        elif cyi >= ny:
            cyi = ny - 1
        c = cyi * nx + cxi
        nxt[i] = head[c]
        head[c] = i
    m = 0
    c2 = cutoff * cutoff
    for i in range(n):
        cxi = int((parts[i, 0] - x0) / cell)
        cyi = int((parts[i, 1] - y0) / cell)
        if cxi < 0:
            cxi = 0
        elif cxi >= nx:
            cxi = nx - 1
        if cyi < 0:
            cyi = 0
        elif cyi >= ny:
            cyi = ny - 1
        for dy in range(-1, 2):
            yy = cyi + dy
            if yy < 0 or yy >= ny:
                continue
            for dx in range(-1, 2):
                xx = cxi + dx
                if xx < 0 or xx >= nx:
                    continue
                j = head[yy * nx + xx]
                while j >= 0:
                    if j > i:
                        ddx = parts[i, 0] - parts[j, 0]
                        ddy = parts[i, 1] - parts[j, 1]
                        if ddx * ddx + ddy * ddy < c2 and m < pairs.shape[0]:
                            pairs[m, 0] = i
                            pairs[m, 1] = j
                            m += 1
                    j = nxt[j]
    return m


@njit(cache=True)
def place_particles(out, start_count, candidates, n_target, min_gap, r_p,
                    box, obj_kind, obj_pose, obj_r, obj_verts_world,
                    fingers, finger_clear):
    """Accept candidate centers in order, skipping any that violate wall
    margins, the object, the fingers, or the min-gap to accepted particles.
    Returns the new count. Grid-accelerated; deterministic in input order."""
    count = start_count
    cell = min_gap
    nx = max(1, int((box[2] - box[0]) / cell) + 1)
    ny = max(1, int((box[3] - box[1]) / cell) + 1)
    head = np.full(nx * ny, -1, dtype=np.int64)
    nxt = np.full(out.shape[0], -1, dtype=np.int64)

    def cell_of(x, y):
        cx = int((x - box[0]) / cell)
        cy = int((y - box[1]) / cell)
        if cx < 0:
            cx = 0
        elif cx >= nx:
            cx = nx - 1
        if cy < 0:
            cy = 0
        elif cy >= ny:
            cy = ny - 1
        return cx, cy

    for i in range(start_count):
        cx, cy = cell_of(out[i, 0], out[i, 1])
        c = cy * nx + cx
        nxt[i] = head[c]
        head[c] = i

    gap2 = min_gap * min_gap
    for k in range(candidates.shape[0]):
        if count >= n_target:
            break
        x, y = candidates[k, 0], candidates[k, 1]
        if (x < box[0] + r_p or y < box[1] + r_p
                or x > box[2] - r_p or y > box[3] - r_p):
            continue
        pen, _, _, _, _ = circle_object_contact(
            x, y, r_p + 1e-4, obj_kind, obj_pose, obj_r, obj_verts_world)
        if pen > 0.0:
            continue
        bad = False
        for f in range(2):
            dx, dy = x - fingers[f, 0], y - fingers[f, 1]
            if dx * dx + dy * dy < finger_clear * finger_clear:
                bad = True
        if bad:
            continue
        cx, cy = cell_of(x, y)
        for oy in range(-1, 2):
            yy = cy + oy
            if yy < 0 or yy >= ny:
                continue
            for ox in range(-1, 2):
                xx = cx + ox
                if xx < 0 or xx >= nx:
                    continue
                j = head[yy * nx + xx]
                while j >= 0:
                    dx, dy = x - out[j, 0], y - out[j, 1]
                    if dx * dx + dy * dy < gap2:
                        bad = True
                        break
                    j = nxt[j]
                if bad:
                    break
            if bad:
                break
        if bad:
            continue
        out[count, 0] = x
        out[count, 1] = y
        c = cy * nx + cx
        nxt[count] = head[c]
        head[c] = count
        count += 1
    return count


@njit(cache=True)
def _apply_object_correction(obj_pose, obj_verts_world, obj_verts_body,
                             obj_kind, obj_invm, obj_invi,
                             mag, nx, ny, qx, qy):
    """Move the object so the contact point advances `mag` along (nx, ny)."""
    rx, ry = qx - obj_pose[0], qy - obj_pose[1]
    rn = rx * ny - ry * nx
    w = obj_invm + rn * rn * obj_invi
    lam = mag / w
    obj_pose[0] += lam * obj_invm * nx
    obj_pose[1] += lam * obj_invm * ny
    obj_pose[2] += lam * obj_invi * rn
    if obj_kind == OBJ_POLY:
        poly_to_world(obj_verts_body, obj_pose, obj_verts_world)


@njit(cache=True)
def _sweep(parts, part_r, pairs, n_pairs,
           near_fingers, n_near_f, near_obj, n_near_o,
           fingers, finger_r, drives, mu,
           obj_kind, obj_pose, obj_r, obj_verts_body, obj_verts_world,
           obj_invm, obj_invi, obj_bound_r, hold_pen,
           part_invm, box, iterations, tol, corr_f):
    """Gauss-Seidel projection with static-friction hold on the object.

    Particles yield freely. The object only moves once a pair's implied
    contact force exceeds its breakaway threshold, i.e. it keeps a residual
    penetration of `hold_pen` while being pushed; that residual is what the
    finger force sensing reads. Finger-object escapes respect Coulomb
    friction against the finger's drive direction (rows of `drives`; zero
    rows disable it): within the cone the object is carried along the push,
    outside it the lateral excess slips. Fingers and walls are kinematic and
    never move. Returns (iterations_used, residual_excess) where
    residual_excess excludes friction-held residuals.
    """
    two_r = 2.0 * part_r
    rf_sum = part_r + finger_r
    it_used = 0
    residual = 0.0
    for it in range(iterations):
        it_used = it + 1
        worst = 0.0

        # particle-finger first: later phases push chain-loaded particles
        # back into the finger, so jams end the sweep with a finger-side
        # penetration -- the through-the-media pushing signal
        for k in range(n_near_f):
            i = near_fingers[k]
            for f in range(2):
                dx = parts[i, 0] - fingers[f, 0]
                dy = parts[i, 1] - fingers[f, 1]
                d = np.sqrt(dx * dx + dy * dy)
                pen = rf_sum - d
                if pen > tol:
                    if d > 1e-12:
                        nx, ny = dx / d, dy / d
                    else:
                        nx, ny = 1.0, 0.0
                    parts[i, 0] += pen * nx
                    parts[i, 1] += pen * ny
                    corr_f[f] += pen
                    if pen > worst:
                        worst = pen

        # particle-particle: split equally
        for k in range(n_pairs):
            i, j = pairs[k, 0], pairs[k, 1]
            dx = parts[j, 0] - parts[i, 0]
            dy = parts[j, 1] - parts[i, 1]
            d = np.sqrt(dx * dx + dy * dy)
            pen = two_r - d
            if pen > tol:
                if d > 1e-12:
                    nx, ny = dx / d, dy / d
                else:
                    nx, ny = 1.0, 0.0
                h = 0.5 * pen
                parts[i, 0] -= h * nx
                parts[i, 1] -= h * ny
                parts[j, 0] += h * nx
                parts[j, 1] += h * ny
                if pen > worst:
                    worst = pen

        # particle-wall: particle takes the full correction
        for i in range(parts.shape[0]):
            for axis in range(2):
                lo = box[axis] + part_r - parts[i, axis]
                if lo > tol:
                    parts[i, axis] += lo
                    if lo > worst:
                        worst = lo
                hi = parts[i, axis] - (box[2 + axis] - part_r)
                if hi > tol:
                    parts[i, axis] -= hi
                    if hi > worst:
                        worst = hi

        # particle-object: object share is mass-weighted and friction-gated
        for k in range(n_near_o):
            i = near_obj[k]
            dx = parts[i, 0] - obj_pose[0]
            dy = parts[i, 1] - obj_pose[1]
            if dx * dx + dy * dy > (obj_bound_r + part_r + 0.01) ** 2:
                continue
            pen, nx, ny, qx, qy = circle_object_contact(
                parts[i, 0], parts[i, 1], part_r,
                obj_kind, obj_pose, obj_r, obj_verts_world)
            if pen > tol:
                allowed = pen - hold_pen
                share_o = 0.0
                if allowed > 0.0:
                    rx, ry = qx - obj_pose[0], qy - obj_pose[1]
                    rn = rx * (-ny) - ry * (-nx)
                    w_o = obj_invm + rn * rn * obj_invi
                    share_o = pen * w_o / (w_o + part_invm)
                    if share_o > allowed:
                        share_o = allowed
                    _apply_object_correction(
                        obj_pose, obj_verts_world, obj_verts_body, obj_kind,
                        obj_invm, obj_invi, share_o, -nx, -ny, qx, qy)
                rem = pen - share_o
                parts[i, 0] += rem * nx
                parts[i, 1] += rem * ny
                if pen > worst:
                    worst = pen

        # finger-object: object yields above its breakaway force only
        for f in range(2):
            pen, nx, ny, qx, qy = circle_object_contact(
                fingers[f, 0], fingers[f, 1], finger_r,
                obj_kind, obj_pose, obj_r, obj_verts_world)
            if pen > tol:
                allowed = pen - hold_pen
                if allowed > 0.0:
                    ex, ey = -nx, -ny  # escape, along the contact normal
                    dvx, dvy = drives[f, 0], drives[f, 1]
                    axial = ex * dvx + ey * dvy
                    if dvx * dvx + dvy * dvy > 0.25 and axial > 0.0:
                        # friction against the drive: keep only the lateral
                        # slip that exceeds the Coulomb bound
                        lx = ex - axial * dvx
                        ly = ey - axial * dvy
                        lat = np.sqrt(lx * lx + ly * ly)
                        keep = lat - mu * axial
                        if keep < 0.0:
                            keep = 0.0
                        if lat > 1e-12:
                            lx, ly = lx / lat * keep, ly / lat * keep
                        ex, ey = axial * dvx + lx, axial * dvy + ly
                        norm = np.sqrt(ex * ex + ey * ey)
                        if norm > 1e-12:
                            ex, ey = ex / norm, ey / norm
                        else:
                            ex, ey = -nx, -ny
                    _apply_object_correction(
                        obj_pose, obj_verts_world, obj_verts_body, obj_kind,
                        obj_invm, obj_invi, allowed, ex, ey, qx, qy)
                    corr_f[f] += allowed
                    if allowed > worst:
                        worst = allowed

        # object-wall
        if obj_kind == OBJ_DISC:
            for axis in range(2):
                lo = box[axis] + obj_r - obj_pose[axis]
                if lo > tol + hold_pen:
                    obj_pose[axis] += lo - hold_pen
                    worst = max(worst, lo - hold_pen)
                hi = obj_pose[axis] - (box[2 + axis] - obj_r)
                if hi > tol + hold_pen:
                    obj_pose[axis] -= hi - hold_pen
                    worst = max(worst, hi - hold_pen)
            # keep disc pose authoritative (no verts to refresh)
        else:
            for axis in range(2):
                for sign in range(2):
                    deep = -1e30
                    vix = -1
                    for v in range(obj_verts_world.shape[0]):
                        val = obj_verts_world[v, axis]
                        pen = (box[axis] - val) if sign == 0 else (val - box[2 + axis])
                        if pen > deep:
                            deep = pen
                            vix = v
                    if deep > tol + hold_pen:
                        mag = deep - hold_pen
                        nx = 0.0
                        ny = 0.0
                        if axis == 0:
                            nx = 1.0 if sign == 0 else -1.0
                        else:
                            ny = 1.0 if sign == 0 else -1.0
                        _apply_object_correction(
                            obj_pose, obj_verts_world, obj_verts_body,
                            obj_kind, obj_invm, obj_invi, mag, nx, ny,
                            obj_verts_world[vix, 0], obj_verts_world[vix, 1])
                        worst = max(worst, mag)

        residual = worst
        if worst <= tol:
            break
    return it_used, residual


@njit(cache=True)
def resolve_kernel(parts, part_r, pairs, n_pairs,
                   near_fingers, n_near_f, near_obj, n_near_o,
                   fingers, finger_r, drives, mu,
                   obj_kind, obj_pose, obj_r, obj_verts_body, obj_verts_world,
                   obj_invm, obj_invi, obj_bound_r, hold_pen,
                   part_invm, box, iterations, tol):
    corr_f = np.zeros(2)
    it_used, residual = _sweep(
        parts, part_r, pairs, n_pairs, near_fingers, n_near_f, near_obj,
        n_near_o, fingers, finger_r, drives, mu, obj_kind, obj_pose, obj_r,
        obj_verts_body, obj_verts_world, obj_invm, obj_invi, obj_bound_r,
        hold_pen, part_invm, box, iterations, tol, corr_f)
    return it_used, residual, corr_f[0], corr_f[1]


@njit(cache=True)
def step_kernel(parts, part_r, pairs, n_pairs,
                near_fingers, n_near_f, near_obj, n_near_o,
                pose_start, pose_delta, opening, finger_r, substeps, mu,
                obj_kind, obj_pose, obj_r, obj_verts_body, obj_verts_world,
                obj_invm, obj_invi, obj_bound_r, hold_pen,
                part_invm, box, iterations, tol, fingers_out):
    """Advance the gripper over `substeps` equal pose increments, resolving
    penetrations after each one. Candidate lists must be built with enough
    slack to cover the whole sweep. Finger drive directions for the friction
    model follow each finger's actual substep displacement."""
    it_used = 0
    residual = 0.0
    corr_f = np.zeros(2)
    drives = np.zeros((2, 2))
    prev = np.zeros((2, 2))
    half = 0.5 * opening
    ax0, ay0 = -np.sin(pose_start[2]), np.cos(pose_start[2])
    prev[0, 0] = pose_start[0] + half * ax0
    prev[0, 1] = pose_start[1] + half * ay0
    prev[1, 0] = pose_start[0] - half * ax0
    prev[1, 1] = pose_start[1] - half * ay0
    for k in range(1, substeps + 1):
        frac = k / substeps
        th = pose_start[2] + frac * pose_delta[2]
        ax, ay = -np.sin(th), np.cos(th)
        cx = pose_start[0] + frac * pose_delta[0]
        cy = pose_start[1] + frac * pose_delta[1]
        fingers_out[0, 0] = cx + half * ax
        fingers_out[0, 1] = cy + half * ay
        fingers_out[1, 0] = cx - half * ax
        fingers_out[1, 1] = cy - half * ay
        for f in range(2):
            mvx = fingers_out[f, 0] - prev[f, 0]
            mvy = fingers_out[f, 1] - prev[f, 1]
            mv = np.sqrt(mvx * mvx + mvy * mvy)
            if mv > 1e-9:
                drives[f, 0] = mvx / mv
                drives[f, 1] = mvy / mv
            else:
                drives[f, 0] = 0.0
                drives[f, 1] = 0.0
            prev[f, 0] = fingers_out[f, 0]
            prev[f, 1] = fingers_out[f, 1]
        it_used, residual = _sweep(
            parts, part_r, pairs, n_pairs, near_fingers, n_near_f, near_obj,
            n_near_o, fingers_out, finger_r, drives, mu, obj_kind, obj_pose,
            obj_r, obj_verts_body, obj_verts_world, obj_invm, obj_invi,
            obj_bound_r, hold_pen, part_invm, box, iterations, tol, corr_f)
    return it_used, residual, corr_f[0], corr_f[1]
