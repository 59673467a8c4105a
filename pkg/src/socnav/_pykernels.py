"""Pure-Python reference implementations of the hot simulation kernels.

The compiled module ``socnav._ckernels`` implements the same functions with
the same signatures; ``socnav.kernels`` picks one at import time.  Grids are
indexed ``grid[row, col]`` with world ``x = col * cell_size`` and
``y = row * cell_size`` at the lower-left corner of a cell.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)
EPS = 1e-9

# (drow, dcol) for the 8-connected neighbourhood
_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def geodesic(free, goal_row, goal_col, cell_size):
    """Dijkstra over the 8-connected free-cell graph without corner cutting."""
    free = np.ascontiguousarray(free, dtype=np.uint8)
    rows, cols = free.shape
    dist = np.full((rows, cols), np.inf)
    if not free[goal_row, goal_col]:
        return dist
    flat = dist.ravel()
    freef = free.ravel()
    diag = cell_size * SQRT2
    start = goal_row * cols + goal_col
    flat[start] = 0.0
    heap = [(0.0, start)]
    done = np.zeros(rows * cols, dtype=bool)
    while heap:
        d, idx = heapq.heappop(heap)
        if done[idx]:
            continue
        done[idx] = True
        r, c = divmod(idx, cols)
        for dr, dc in _NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                continue
            nidx = nr * cols + nc
            if not freef[nidx] or done[nidx]:
                continue
            if dr and dc:
                if not (freef[r * cols + nc] and freef[nr * cols + c]):
                    continue
                nd = d + diag
            else:
                nd = d + cell_size
            if nd < flat[nidx]:
                flat[nidx] = nd
                heapq.heappush(heap, (nd, nidx))
    return dist


def _occupied_at(occ, row, col):
    rows, cols = occ.shape
    if row < 0 or row >= rows or col < 0 or col >= cols:
        return True
    return bool(occ[row, col])


def disc_is_free(occupied, cell_size, x, y, radius):
    """True when no occupied cell square (or off-grid area) meets the open disc."""
    c0 = int(math.floor((x - radius) / cell_size))
    c1 = int(math.floor((x + radius) / cell_size))
    r0 = int(math.floor((y - radius) / cell_size))
    r1 = int(math.floor((y + radius) / cell_size))
    r2 = radius * radius
    for row in range(r0, r1 + 1):
        ylo = row * cell_size
        dy = max(ylo - y, 0.0, y - (ylo + cell_size))
        for col in range(c0, c1 + 1):
            if not _occupied_at(occupied, row, col):
                continue
            xlo = col * cell_size
            dx = max(xlo - x, 0.0, x - (xlo + cell_size))
            if dx * dx + dy * dy < r2:
                return False
    return True


def _ray_grid(occ, cell_size, x, y, dx, dy, d_max):
    rows, cols = occ.shape
    gx, gy = x / cell_size, y / cell_size
    col, row = int(math.floor(gx)), int(math.floor(gy))
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    if dx != 0.0:
        next_x = (col + (1 if dx > 0 else 0) - gx) / dx
        delta_x = abs(1.0 / dx)
    else:
        next_x = delta_x = math.inf
    if dy != 0.0:
        next_y = (row + (1 if dy > 0 else 0) - gy) / dy
        delta_y = abs(1.0 / dy)
    else:
        next_y = delta_y = math.inf
    t_max = d_max / cell_size
    while True:
        if next_x < next_y:
            t = next_x
            next_x += delta_x
            col += step_c
        else:
            t = next_y
            next_y += delta_y
            row += step_r
        if t >= t_max:
            return d_max
        if row < 0 or row >= rows or col < 0 or col >= cols:
            # leaving the grid means nothing else can be hit
            return d_max
        if occ[row, col]:
            return t * cell_size


def raycast(occupied, cell_size, x, y, angles, d_max, humans):
    """Depth along each ray angle to the nearest cell boundary or human disc."""
    occ = np.asarray(occupied)
    out = np.empty(len(angles))
    for k, a in enumerate(angles):
        dx, dy = math.cos(a), math.sin(a)
        best = _ray_grid(occ, cell_size, x, y, dx, dy, d_max)
        for hx, hy, hr in humans:
            ox, oy = hx - x, hy - y
            b = ox * dx + oy * dy
            c = ox * ox + oy * oy - hr * hr
            if c <= 0.0:
                best = 0.0
                continue
            disc = b * b - c
            if disc < 0.0 or b <= 0.0:
                continue
            t = b - math.sqrt(disc)
            if t < best:
                best = t
        out[k] = min(best, d_max)
    return out


def obstacle_index(occupied, cell_size, bin_cells):
    """Bucket wall-surface cells (occupied, with a free 4-neighbour) into square bins.

    Returns ``(starts, points, bin_size, n_bin_rows, n_bin_cols)`` where the
    cell centres of bin ``b`` are ``points[starts[b]:starts[b + 1]]``.
    """
    occ = np.asarray(occupied).astype(bool)
    rows, cols = occ.shape
    padded = np.pad(occ, 1, constant_values=True)
    all_occ_nb = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    surface = occ & ~all_occ_nb
    r, c = np.nonzero(surface)
    nbr = (rows + bin_cells - 1) // bin_cells
    nbc = (cols + bin_cells - 1) // bin_cells
    b = (r // bin_cells) * nbc + (c // bin_cells)
    order = np.lexsort((c, r, b))
    r, c, b = r[order], c[order], b[order]
    starts = np.searchsorted(b, np.arange(nbr * nbc + 1)).astype(np.int64)
    pts = np.column_stack(((c + 0.5) * cell_size, (r + 0.5) * cell_size)).astype(np.float64)
    return starts, np.ascontiguousarray(pts), float(bin_cells * cell_size), int(nbr), int(nbc)


def local_obstacles(index, x, y, reach, n_sectors):
    """Nearest wall-surface cell centre per angular sector within ``reach``."""
    starts, pts, bin_size, nbr, nbc = index
    best_d = [math.inf] * n_sectors
    best_p = [None] * n_sectors
    b0c = max(int(math.floor((x - reach) / bin_size)), 0)
    b1c = min(int(math.floor((x + reach) / bin_size)), nbc - 1)
    b0r = max(int(math.floor((y - reach) / bin_size)), 0)
    b1r = min(int(math.floor((y + reach) / bin_size)), nbr - 1)
    reach2 = reach * reach
    for br in range(b0r, b1r + 1):
        for bc in range(b0c, b1c + 1):
            b = br * nbc + bc
            for k in range(starts[b], starts[b + 1]):
                cx = pts[k, 0] - x
                cy = pts[k, 1] - y
                d2 = cx * cx + cy * cy
                if d2 > reach2:
                    continue
                s = int((math.atan2(cy, cx) + math.pi) / (2.0 * math.pi) * n_sectors) % n_sectors
                if d2 < best_d[s]:
                    best_d[s] = d2
                    best_p[s] = (pts[k, 0], pts[k, 1])
    out = [p for p in best_p if p is not None]
    return np.array(out, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# ORCA.  A line is (px, py, dx, dy); the permitted side is the left of the
# direction, i.e. det(d, p - v) <= 0.


def _det(ax, ay, bx, by):
    return ax * by - ay * bx


def orca_line(px, py, vx, vy, r, ox, oy, ovx, ovy, orad, resp, inv_tau, inv_dt):
    rpx, rpy = ox - px, oy - py
    rvx, rvy = vx - ovx, vy - ovy
    dist_sq = rpx * rpx + rpy * rpy
    comb = r + orad
    comb_sq = comb * comb
    if dist_sq > comb_sq:
        wx, wy = rvx - inv_tau * rpx, rvy - inv_tau * rpy
        w_sq = wx * wx + wy * wy
        dot1 = wx * rpx + wy * rpy
        if dot1 < 0.0 and dot1 * dot1 > comb_sq * w_sq:
            w_len = math.sqrt(w_sq)
            ux, uy = wx / w_len, wy / w_len
            dx, dy = uy, -ux
            s = comb * inv_tau - w_len
            ux, uy = s * ux, s * uy
        else:
            leg = math.sqrt(dist_sq - comb_sq)
            if _det(rpx, rpy, wx, wy) > 0.0:
                dx = (rpx * leg - rpy * comb) / dist_sq
                dy = (rpx * comb + rpy * leg) / dist_sq
            else:
                dx = -(rpx * leg + rpy * comb) / dist_sq
                dy = -(-rpx * comb + rpy * leg) / dist_sq
            dot2 = rvx * dx + rvy * dy
            ux, uy = dot2 * dx - rvx, dot2 * dy - rvy
    else:
        wx, wy = rvx - inv_dt * rpx, rvy - inv_dt * rpy
        w_len = math.sqrt(wx * wx + wy * wy)
        if w_len < EPS:
            # coincident centres and velocities: push along an arbitrary fixed axis
            wx, wy, w_len = 1.0, 0.0, 1.0
        ux, uy = wx / w_len, wy / w_len
        dx, dy = uy, -ux
        s = comb * inv_dt - w_len
        ux, uy = s * ux, s * uy
    return (vx + resp * ux, vy + resp * uy, dx, dy)


def _lp1(lines, line_no, radius, opt, direction_opt):
    px, py, dx, dy = lines[line_no]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t_left, t_right = -dot - sq, -dot + sq
    for i in range(line_no):
        qx, qy, ex, ey = lines[i]
        denom = _det(dx, dy, ex, ey)
        numer = _det(ex, ey, px - qx, py - qy)
        if abs(denom) <= EPS:
            if numer < 0.0:
                return None
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return None
    if direction_opt:
        t = t_right if opt[0] * dx + opt[1] * dy > 0.0 else t_left
    else:
        t = dx * (opt[0] - px) + dy * (opt[1] - py)
        t = min(max(t, t_left), t_right)
    return (px + t * dx, py + t * dy)


def _lp2(lines, radius, opt, direction_opt):
    ox, oy = opt
    if direction_opt:
        res = (ox * radius, oy * radius)
    elif ox * ox + oy * oy > radius * radius:
        n = math.hypot(ox, oy)
        res = (ox / n * radius, oy / n * radius)
    else:
        res = (ox, oy)
    for i, (px, py, dx, dy) in enumerate(lines):
        if _det(dx, dy, px - res[0], py - res[1]) > 0.0:
            new = _lp1(lines, i, radius, opt, direction_opt)
            if new is None:
                return i, res
            res = new
    return len(lines), res


def _lp3(lines, n_hard, begin, radius, res):
    distance = 0.0
    for i in range(begin, len(lines)):
        px, py, dx, dy = lines[i]
        if _det(dx, dy, px - res[0], py - res[1]) > distance:
            proj = list(lines[:n_hard])
            for j in range(n_hard, i):
                qx, qy, ex, ey = lines[j]
                determinant = _det(dx, dy, ex, ey)
                if abs(determinant) <= EPS:
                    if dx * ex + dy * ey > 0.0:
                        continue
                    lpx, lpy = 0.5 * (px + qx), 0.5 * (py + qy)
                else:
                    s = _det(ex, ey, px - qx, py - qy) / determinant
                    lpx, lpy = px + s * dx, py + s * dy
                ldx, ldy = ex - dx, ey - dy
                n = math.hypot(ldx, ldy)
                proj.append((lpx, lpy, ldx / n, ldy / n))
            fail, cand = _lp2(proj, radius, (-dy, dx), True)
            if fail >= len(proj):
                res = cand
            distance = _det(dx, dy, px - res[0], py - res[1])
    return res


def solve_lines(lines, n_hard, max_speed, pref):
    """Velocity closest to ``pref`` inside all half-planes and the speed disc."""
    fail, res = _lp2(lines, max_speed, pref, False)
    if fail < len(lines):
        res = _lp3(lines, n_hard, fail, max_speed, res)
    return res


def orca_lines(pos, vel, radius, neighbours, resp, obstacles, obstacle_radius,
               tau, tau_obs, inv_dt):
    """ORCA constraints: static obstacle lines first, then moving neighbours."""
    px, py = pos
    vx, vy = vel
    lines = []
    for ox, oy in obstacles:
        lines.append(orca_line(px, py, vx, vy, radius, ox, oy, 0.0, 0.0,
                               obstacle_radius, 1.0, 1.0 / tau_obs, inv_dt))
    n_hard = len(lines)
    for (ox, oy, ovx, ovy, orad), f in zip(neighbours, resp):
        lines.append(orca_line(px, py, vx, vy, radius, ox, oy, ovx, ovy, orad,
                               f, 1.0 / tau, inv_dt))
    return lines, n_hard


def _clamp_speed(vx, vy, max_speed):
    s = math.hypot(vx, vy)
    if s > max_speed:
        return vx * max_speed / s, vy * max_speed / s
    return vx, vy


def orca_velocity(pos, vel, radius, pref_vel, max_speed, neighbours, resp,
                  obstacles, obstacle_radius, tau, tau_obs, inv_dt):
    lines, n_hard = orca_lines(pos, vel, radius, neighbours, resp, obstacles,
                               obstacle_radius, tau, tau_obs, inv_dt)
    res = solve_lines(lines, n_hard, max_speed, (float(pref_vel[0]), float(pref_vel[1])))
    return _clamp_speed(res[0], res[1], max_speed)


def crowd_velocities(index, cell_size, pos, vel, radii, pref_vel, max_speed,
                     walking, robot, tau, tau_obs, inv_dt, obstacle_reach,
                     n_sectors, neighbour_reach):
    """ORCA velocity for every walking human.

    ``robot`` is ``(x, y, vx, vy, r)``; it and idle humans are avoided with
    full responsibility, walking humans with half.
    """
    n = len(pos)
    out = np.zeros((n, 2))
    obstacle_radius = cell_size * SQRT2 * 0.5
    reach2 = neighbour_reach * neighbour_reach
    for i in range(n):
        if not walking[i]:
            continue
        neigh, resp = [], []
        for j in range(n):
            if j == i:
                continue
            ddx, ddy = pos[j, 0] - pos[i, 0], pos[j, 1] - pos[i, 1]
            if ddx * ddx + ddy * ddy > reach2:
                continue
            neigh.append((pos[j, 0], pos[j, 1], vel[j, 0], vel[j, 1], radii[j]))
            resp.append(0.5 if walking[j] else 1.0)
        rx, ry, rvx, rvy, rr = robot
        if rr > 0.0:
            ddx, ddy = rx - pos[i, 0], ry - pos[i, 1]
            if ddx * ddx + ddy * ddy <= reach2:
                neigh.append((rx, ry, rvx, rvy, rr))
                resp.append(1.0)
        obst = local_obstacles(index, pos[i, 0], pos[i, 1], obstacle_reach, n_sectors)
        out[i] = orca_velocity(pos[i], vel[i], radii[i], pref_vel[i], max_speed[i],
                               neigh, resp, obst, obstacle_radius, tau, tau_obs, inv_dt)
    return out


def commit_positions(occupied, cell_size, old, proposed, radii, robot):
    """Accept proposed moves, reverting any that would break clearance or overlap."""
    n = len(old)
    new = np.array(proposed, dtype=np.float64, copy=True)
    moved = np.any(new != old, axis=1)
    rx, ry, rr = robot
    for i in range(n):
        if not moved[i]:
            continue
        if not disc_is_free(occupied, cell_size, new[i, 0], new[i, 1], radii[i]):
            new[i] = old[i]
            moved[i] = False
        elif rr > 0.0 and math.hypot(new[i, 0] - rx, new[i, 1] - ry) < radii[i] + rr + EPS:
            new[i] = old[i]
            moved[i] = False
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(i + 1, n):
                if not (moved[i] or moved[j]):
                    continue
                d = math.hypot(new[i, 0] - new[j, 0], new[i, 1] - new[j, 1])
                if d < radii[i] + radii[j] + EPS:
                    for k in (i, j):
                        if moved[k]:
                            new[k] = old[k]
                            moved[k] = False
                    changed = True
    return new


def _field_at(field, cell_size, x, y):
    rows, cols = field.shape
    col, row = int(math.floor(x / cell_size)), int(math.floor(y / cell_size))
    if row < 0 or row >= rows or col < 0 or col >= cols:
        return math.inf
    return field[row, col]


def descent_direction(field, cell_size, x, y, lookahead, n_dirs):
    """Unit direction towards the lowest field value reachable in a straight line.

    Returns ``(0, 0)`` when no lookahead point improves on the current value.
    """
    here = _field_at(field, cell_size, x, y)
    best = here
    best_dir = (0.0, 0.0)
    n_samples = max(int(math.ceil(lookahead / (0.5 * cell_size))), 1)
    for k in range(n_dirs):
        a = 2.0 * math.pi * k / n_dirs
        dx, dy = math.cos(a), math.sin(a)
        ok = True
        for s in range(1, n_samples + 1):
            t = lookahead * s / n_samples
            if not math.isfinite(_field_at(field, cell_size, x + t * dx, y + t * dy)):
                ok = False
                break
        if not ok:
            continue
        v = _field_at(field, cell_size, x + lookahead * dx, y + lookahead * dy)
        if v < best - EPS:
            best = v
            best_dir = (dx, dy)
    return best_dir
