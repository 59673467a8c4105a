# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``socnav._pykernels``.

Signatures and results match the Python module; see it for conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs, cos, sin, atan2, ceil, INFINITY, M_PI, isfinite, hypot
from libc.stdlib cimport malloc, free as cfree

cnp.import_array()

cdef enum:
    MAX_LINES = 256
cdef double SQRT2 = 1.4142135623730951
cdef double EPS = 1e-9

cdef struct Line:
    double px
    double py
    double dx
    double dy

cdef struct HeapItem:
    double d
    Py_ssize_t idx


# ---------------------------------------------------------------------------
# geodesic distance field

cdef inline void _heap_push(HeapItem* heap, Py_ssize_t* size, double d, Py_ssize_t idx) noexcept nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent].d < d or (heap[parent].d == d and heap[parent].idx <= idx):
            break
        heap[i] = heap[parent]
        i = parent
    heap[i].d = d
    heap[i].idx = idx


cdef inline HeapItem _heap_pop(HeapItem* heap, Py_ssize_t* size) noexcept nogil:
    cdef HeapItem top = heap[0]
    cdef HeapItem last
    cdef Py_ssize_t i = 0, child, n
    size[0] -= 1
    n = size[0]
    if n == 0:
        return top
    last = heap[n]
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and (heap[child + 1].d < heap[child].d or
                              (heap[child + 1].d == heap[child].d and heap[child + 1].idx < heap[child].idx)):
            child += 1
        if last.d < heap[child].d or (last.d == heap[child].d and last.idx <= heap[child].idx):
            break
        heap[i] = heap[child]
        i = child
    heap[i] = last
    return top


def geodesic(free_in, Py_ssize_t goal_row, Py_ssize_t goal_col, double cell_size):
    cdef const cnp.uint8_t[:, ::1] free = np.ascontiguousarray(free_in, dtype=np.uint8)
    cdef Py_ssize_t rows = free.shape[0], cols = free.shape[1]
    out = np.full((rows, cols), np.inf)
    cdef double[:, ::1] dist = out
    if not free[goal_row, goal_col]:
        return out
    cdef Py_ssize_t n = rows * cols
    cdef Py_ssize_t cap = 8 * n + 1
    cdef HeapItem* heap = <HeapItem*> malloc(cap * sizeof(HeapItem))
    cdef cnp.uint8_t* done = <cnp.uint8_t*> malloc(n)
    cdef Py_ssize_t size = 0, i, r, c, nr, nc, k, idx
    cdef int dr, dc
    cdef double d, nd, diag = cell_size * SQRT2
    cdef HeapItem item
    cdef int DR[8]
    cdef int DC[8]
    DR[:] = [-1, 1, 0, 0, -1, -1, 1, 1]
    DC[:] = [0, 0, -1, 1, -1, 1, -1, 1]
    if heap == NULL or done == NULL:
        cfree(heap)
        cfree(done)
        raise MemoryError()
    with nogil:
        for i in range(n):
            done[i] = 0
        dist[goal_row, goal_col] = 0.0
        _heap_push(heap, &size, 0.0, goal_row * cols + goal_col)
        while size > 0:
            item = _heap_pop(heap, &size)
            idx = item.idx
            if done[idx]:
                continue
            done[idx] = 1
            d = item.d
            r = idx // cols
            c = idx - r * cols
            for k in range(8):
                dr = DR[k]
                dc = DC[k]
                nr = r + dr
                nc = c + dc
                if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                    continue
                if not free[nr, nc] or done[nr * cols + nc]:
                    continue
                if dr != 0 and dc != 0:
                    if not (free[r, nc] and free[nr, c]):
                        continue
                    nd = d + diag
                else:
                    nd = d + cell_size
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    _heap_push(heap, &size, nd, nr * cols + nc)
    cfree(heap)
    cfree(done)
    return out


# ---------------------------------------------------------------------------
# occupancy queries

cdef inline bint _occ(const cnp.uint8_t[:, ::1] occ, Py_ssize_t row, Py_ssize_t col) noexcept nogil:
    if row < 0 or row >= occ.shape[0] or col < 0 or col >= occ.shape[1]:
        return True
    return occ[row, col] != 0


cdef bint _disc_free(const cnp.uint8_t[:, ::1] occ, double cs, double x, double y, double radius) noexcept nogil:
    cdef Py_ssize_t c0 = <Py_ssize_t> floor((x - radius) / cs)
    cdef Py_ssize_t c1 = <Py_ssize_t> floor((x + radius) / cs)
    cdef Py_ssize_t r0 = <Py_ssize_t> floor((y - radius) / cs)
    cdef Py_ssize_t r1 = <Py_ssize_t> floor((y + radius) / cs)
    cdef Py_ssize_t row, col
    cdef double r2 = radius * radius, ylo, xlo, dx, dy
    for row in range(r0, r1 + 1):
        ylo = row * cs
        dy = 0.0
        if ylo - y > dy:
            dy = ylo - y
        if y - (ylo + cs) > dy:
            dy = y - (ylo + cs)
        for col in range(c0, c1 + 1):
            if not _occ(occ, row, col):
                continue
            xlo = col * cs
            dx = 0.0
            if xlo - x > dx:
                dx = xlo - x
            if x - (xlo + cs) > dx:
                dx = x - (xlo + cs)
            if dx * dx + dy * dy < r2:
                return False
    return True


def disc_is_free(occupied, double cell_size, double x, double y, double radius):
    cdef const cnp.uint8_t[:, ::1] occ = np.ascontiguousarray(occupied, dtype=np.uint8)
    return bool(_disc_free(occ, cell_size, x, y, radius))


cdef double _ray_grid(const cnp.uint8_t[:, ::1] occ, double cs, double x, double y,
                      double dx, double dy, double d_max) noexcept nogil:
    cdef Py_ssize_t rows = occ.shape[0], cols = occ.shape[1]
    cdef double gx = x / cs, gy = y / cs
    cdef Py_ssize_t col = <Py_ssize_t> floor(gx), row = <Py_ssize_t> floor(gy)
    cdef int step_c = 1 if dx > 0 else -1
    cdef int step_r = 1 if dy > 0 else -1
    cdef double next_x, next_y, delta_x, delta_y, t, t_max = d_max / cs
    if dx != 0.0:
        next_x = (col + (1 if dx > 0 else 0) - gx) / dx
        delta_x = fabs(1.0 / dx)
    else:
        next_x = INFINITY
        delta_x = INFINITY
    if dy != 0.0:
        next_y = (row + (1 if dy > 0 else 0) - gy) / dy
        delta_y = fabs(1.0 / dy)
    else:
        next_y = INFINITY
        delta_y = INFINITY
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
            return d_max
        if occ[row, col]:
            return t * cs


def raycast(occupied, double cell_size, double x, double y, angles_in, double d_max, humans_in):
    cdef const cnp.uint8_t[:, ::1] occ = np.ascontiguousarray(occupied, dtype=np.uint8)
    cdef const double[::1] angles = np.ascontiguousarray(angles_in, dtype=np.float64)
    cdef const double[:, ::1] humans = np.ascontiguousarray(
        np.asarray(humans_in, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t n = angles.shape[0], m = humans.shape[0], k, j
    out = np.empty(n)
    cdef double[::1] res = out
    cdef double dx, dy, best, ox, oy, b, c, disc, t
    with nogil:
        for k in range(n):
            dx = cos(angles[k])
            dy = sin(angles[k])
            best = _ray_grid(occ, cell_size, x, y, dx, dy, d_max)
            for j in range(m):
                ox = humans[j, 0] - x
                oy = humans[j, 1] - y
                b = ox * dx + oy * dy
                c = ox * ox + oy * oy - humans[j, 2] * humans[j, 2]
                if c <= 0.0:
                    best = 0.0
                    continue
                disc = b * b - c
                if disc < 0.0 or b <= 0.0:
                    continue
                t = b - sqrt(disc)
                if t < best:
                    best = t
            res[k] = best if best < d_max else d_max
    return out


from ._pykernels import obstacle_index


cdef int _local_obstacles(const cnp.int64_t[::1] starts, const double[:, ::1] pts, double bin_size,
                          Py_ssize_t nbr, Py_ssize_t nbc, double x, double y,
                          double reach, int n_sectors, double* px, double* py) noexcept nogil:
    # px/py must hold n_sectors entries; returns the number written
    cdef Py_ssize_t b0c = <Py_ssize_t> floor((x - reach) / bin_size)
    cdef Py_ssize_t b1c = <Py_ssize_t> floor((x + reach) / bin_size)
    cdef Py_ssize_t b0r = <Py_ssize_t> floor((y - reach) / bin_size)
    cdef Py_ssize_t b1r = <Py_ssize_t> floor((y + reach) / bin_size)
    cdef Py_ssize_t br, bc, b, k
    cdef int s, count = 0
    cdef double cx, cy, d2, reach2 = reach * reach
    cdef double bd[MAX_LINES]
    cdef double bx[MAX_LINES]
    cdef double by[MAX_LINES]
    if b0c < 0:
        b0c = 0
    if b0r < 0:
        b0r = 0
    if b1c > nbc - 1:
        b1c = nbc - 1
    if b1r > nbr - 1:
        b1r = nbr - 1
    for s in range(n_sectors):
        bd[s] = INFINITY
    for br in range(b0r, b1r + 1):
        for bc in range(b0c, b1c + 1):
            b = br * nbc + bc
            for k in range(starts[b], starts[b + 1]):
                cx = pts[k, 0] - x
                cy = pts[k, 1] - y
                d2 = cx * cx + cy * cy
                if d2 > reach2:
                    continue
                s = (<int> ((atan2(cy, cx) + M_PI) / (2.0 * M_PI) * n_sectors)) % n_sectors
                if d2 < bd[s]:
                    bd[s] = d2
                    bx[s] = pts[k, 0]
                    by[s] = pts[k, 1]
    for s in range(n_sectors):
        if bd[s] < INFINITY:
            px[count] = bx[s]
            py[count] = by[s]
            count += 1
    return count


def local_obstacles(index, double x, double y, double reach, int n_sectors):
    cdef const cnp.int64_t[::1] starts = index[0]
    cdef const double[:, ::1] pts = index[1]
    cdef double px[MAX_LINES]
    cdef double py[MAX_LINES]
    if n_sectors > MAX_LINES:
        raise ValueError("too many sectors")
    cdef int n = _local_obstacles(starts, pts, index[2], index[3], index[4], x, y, reach,
                                  n_sectors, px, py)
    out = np.empty((n, 2))
    cdef int k
    for k in range(n):
        out[k, 0] = px[k]
        out[k, 1] = py[k]
    return out


# ---------------------------------------------------------------------------
# ORCA

cdef inline double _det(double ax, double ay, double bx, double by) noexcept nogil:
    return ax * by - ay * bx


cdef Line _orca_line(double px, double py, double vx, double vy, double r,
                     double ox, double oy, double ovx, double ovy, double orad,
                     double resp, double inv_tau, double inv_dt) noexcept nogil:
    cdef Line line
    cdef double rpx = ox - px, rpy = oy - py
    cdef double rvx = vx - ovx, rvy = vy - ovy
    cdef double dist_sq = rpx * rpx + rpy * rpy
    cdef double comb = r + orad
    cdef double comb_sq = comb * comb
    cdef double wx, wy, w_sq, dot1, w_len, ux, uy, dx, dy, s, leg, dot2
    if dist_sq > comb_sq:
        wx = rvx - inv_tau * rpx
        wy = rvy - inv_tau * rpy
        w_sq = wx * wx + wy * wy
        dot1 = wx * rpx + wy * rpy
        if dot1 < 0.0 and dot1 * dot1 > comb_sq * w_sq:
            w_len = sqrt(w_sq)
            ux = wx / w_len
            uy = wy / w_len
            dx = uy
            dy = -ux
            s = comb * inv_tau - w_len
            ux = s * ux
            uy = s * uy
        else:
            leg = sqrt(dist_sq - comb_sq)
            if _det(rpx, rpy, wx, wy) > 0.0:
                dx = (rpx * leg - rpy * comb) / dist_sq
                dy = (rpx * comb + rpy * leg) / dist_sq
            else:
                dx = -(rpx * leg + rpy * comb) / dist_sq
                dy = -(-rpx * comb + rpy * leg) / dist_sq
            dot2 = rvx * dx + rvy * dy
            ux = dot2 * dx - rvx
            uy = dot2 * dy - rvy
    else:
        wx = rvx - inv_dt * rpx
        wy = rvy - inv_dt * rpy
        w_len = sqrt(wx * wx + wy * wy)
        if w_len < EPS:
            wx = 1.0
            wy = 0.0
            w_len = 1.0
        ux = wx / w_len
        uy = wy / w_len
        dx = uy
        dy = -ux
        s = comb * inv_dt - w_len
        ux = s * ux
        uy = s * uy
    line.px = vx + resp * ux
    line.py = vy + resp * uy
    line.dx = dx
    line.dy = dy
    return line


cdef bint _lp1(Line* lines, int line_no, double radius, double optx, double opty,
               bint direction_opt, double* rx, double* ry) noexcept nogil:
    cdef Line L = lines[line_no]
    cdef double dot = L.px * L.dx + L.py * L.dy
    cdef double disc = dot * dot + radius * radius - (L.px * L.px + L.py * L.py)
    cdef double sq, t_left, t_right, denom, numer, t
    cdef int i
    if disc < 0.0:
        return False
    sq = sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for i in range(line_no):
        denom = _det(L.dx, L.dy, lines[i].dx, lines[i].dy)
        numer = _det(lines[i].dx, lines[i].dy, L.px - lines[i].px, L.py - lines[i].py)
        if fabs(denom) <= EPS:
            if numer < 0.0:
                return False
            continue
        t = numer / denom
        if denom >= 0.0:
            if t < t_right:
                t_right = t
        else:
            if t > t_left:
                t_left = t
        if t_left > t_right:
            return False
    if direction_opt:
        if optx * L.dx + opty * L.dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = L.dx * (optx - L.px) + L.dy * (opty - L.py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    rx[0] = L.px + t * L.dx
    ry[0] = L.py + t * L.dy
    return True


cdef int _lp2(Line* lines, int n, double radius, double optx, double opty,
              bint direction_opt, double* rx, double* ry) noexcept nogil:
    cdef double nrm, tx, ty
    cdef int i
    if direction_opt:
        rx[0] = optx * radius
        ry[0] = opty * radius
    elif optx * optx + opty * opty > radius * radius:
        nrm = hypot(optx, opty)
        rx[0] = optx / nrm * radius
        ry[0] = opty / nrm * radius
    else:
        rx[0] = optx
        ry[0] = opty
    for i in range(n):
        if _det(lines[i].dx, lines[i].dy, lines[i].px - rx[0], lines[i].py - ry[0]) > 0.0:
            tx = rx[0]
            ty = ry[0]
            if not _lp1(lines, i, radius, optx, opty, direction_opt, rx, ry):
                rx[0] = tx
                ry[0] = ty
                return i
    return n


cdef void _lp3(Line* lines, int n, int n_hard, int begin, double radius,
               double* rx, double* ry) noexcept nogil:
    cdef Line proj[MAX_LINES]
    cdef double distance = 0.0, determinant, s, lx, ly, nrm, cx, cy
    cdef int i, j, m
    cdef Line Li, Lj
    for i in range(begin, n):
        Li = lines[i]
        if _det(Li.dx, Li.dy, Li.px - rx[0], Li.py - ry[0]) > distance:
            m = 0
            for j in range(n_hard):
                proj[m] = lines[j]
                m += 1
            for j in range(n_hard, i):
                Lj = lines[j]
                determinant = _det(Li.dx, Li.dy, Lj.dx, Lj.dy)
                if fabs(determinant) <= EPS:
                    if Li.dx * Lj.dx + Li.dy * Lj.dy > 0.0:
                        continue
                    proj[m].px = 0.5 * (Li.px + Lj.px)
                    proj[m].py = 0.5 * (Li.py + Lj.py)
                else:
                    s = _det(Lj.dx, Lj.dy, Li.px - Lj.px, Li.py - Lj.py) / determinant
                    proj[m].px = Li.px + s * Li.dx
                    proj[m].py = Li.py + s * Li.dy
                lx = Lj.dx - Li.dx
                ly = Lj.dy - Li.dy
                nrm = hypot(lx, ly)
                proj[m].dx = lx / nrm
                proj[m].dy = ly / nrm
                m += 1
            cx = rx[0]
            cy = ry[0]
            if _lp2(proj, m, radius, -Li.dy, Li.dx, True, &cx, &cy) >= m:
                rx[0] = cx
                ry[0] = cy
            distance = _det(Li.dx, Li.dy, Li.px - rx[0], Li.py - ry[0])


cdef void _solve(Line* lines, int n, int n_hard, double max_speed,
                 double prefx, double prefy, double* rx, double* ry) noexcept nogil:
    cdef int fail = _lp2(lines, n, max_speed, prefx, prefy, False, rx, ry)
    cdef double s
    if fail < n:
        _lp3(lines, n, n_hard, fail, max_speed, rx, ry)
    s = hypot(rx[0], ry[0])
    if s > max_speed:
        rx[0] = rx[0] * max_speed / s
        ry[0] = ry[0] * max_speed / s


def orca_velocity(pos, vel, double radius, pref_vel, double max_speed, neighbours, resp,
                  obstacles, double obstacle_radius, double tau, double tau_obs, double inv_dt):
    cdef const double[:, ::1] nb = np.ascontiguousarray(
        np.asarray(neighbours, dtype=np.float64).reshape(-1, 5))
    cdef const double[::1] rs = np.ascontiguousarray(np.asarray(resp, dtype=np.float64).reshape(-1))
    cdef const double[:, ::1] ob = np.ascontiguousarray(
        np.asarray(obstacles, dtype=np.float64).reshape(-1, 2))
    cdef Line lines[MAX_LINES]
    cdef int n = 0, k
    cdef double px = pos[0], py = pos[1], vx = vel[0], vy = vel[1], rx, ry
    if nb.shape[0] + ob.shape[0] > MAX_LINES:
        raise ValueError("too many constraints")
    for k in range(ob.shape[0]):
        lines[n] = _orca_line(px, py, vx, vy, radius, ob[k, 0], ob[k, 1], 0.0, 0.0,
                              obstacle_radius, 1.0, 1.0 / tau_obs, inv_dt)
        n += 1
    cdef int n_hard = n
    for k in range(nb.shape[0]):
        lines[n] = _orca_line(px, py, vx, vy, radius, nb[k, 0], nb[k, 1], nb[k, 2], nb[k, 3],
                              nb[k, 4], rs[k], 1.0 / tau, inv_dt)
        n += 1
    _solve(lines, n, n_hard, max_speed, pref_vel[0], pref_vel[1], &rx, &ry)
    return (rx, ry)


def crowd_velocities(index, double cell_size, pos_in, vel_in, radii_in, pref_in, speed_in,
                     walking_in, robot, double tau, double tau_obs, double inv_dt,
                     double obstacle_reach, int n_sectors, double neighbour_reach):
    cdef const cnp.int64_t[::1] starts = index[0]
    cdef const double[:, ::1] ipts = index[1]
    cdef double bin_size = index[2]
    cdef Py_ssize_t nbr = index[3], nbc = index[4]
    cdef const double[:, ::1] pos = np.ascontiguousarray(pos_in, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] vel = np.ascontiguousarray(vel_in, dtype=np.float64).reshape(-1, 2)
    cdef const double[::1] radii = np.ascontiguousarray(radii_in, dtype=np.float64)
    cdef const double[:, ::1] pref = np.ascontiguousarray(pref_in, dtype=np.float64).reshape(-1, 2)
    cdef const double[::1] speed = np.ascontiguousarray(speed_in, dtype=np.float64)
    cdef const cnp.uint8_t[::1] walking = np.ascontiguousarray(walking_in, dtype=np.uint8)
    cdef Py_ssize_t n = pos.shape[0], i, j
    if n + n_sectors + 1 > MAX_LINES:
        raise ValueError("too many constraints")
    out = np.zeros((n, 2))
    cdef double[:, ::1] res = out
    cdef double rbx = robot[0], rby = robot[1], rbvx = robot[2], rbvy = robot[3], rbr = robot[4]
    cdef Line lines[MAX_LINES]
    cdef double opx[MAX_LINES]
    cdef double opy[MAX_LINES]
    cdef double obstacle_radius = cell_size * SQRT2 * 0.5
    cdef double reach2 = neighbour_reach * neighbour_reach, ddx, ddy, rx, ry
    cdef int m, k, nl, n_hard
    with nogil:
        for i in range(n):
            if not walking[i]:
                continue
            m = _local_obstacles(starts, ipts, bin_size, nbr, nbc, pos[i, 0], pos[i, 1],
                                 obstacle_reach, n_sectors, opx, opy)
            nl = 0
            for k in range(m):
                lines[nl] = _orca_line(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radii[i],
                                       opx[k], opy[k], 0.0, 0.0, obstacle_radius, 1.0,
                                       1.0 / tau_obs, inv_dt)
                nl += 1
            n_hard = nl
            for j in range(n):
                if j == i:
                    continue
                ddx = pos[j, 0] - pos[i, 0]
                ddy = pos[j, 1] - pos[i, 1]
                if ddx * ddx + ddy * ddy > reach2:
                    continue
                lines[nl] = _orca_line(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radii[i],
                                       pos[j, 0], pos[j, 1], vel[j, 0], vel[j, 1], radii[j],
                                       0.5 if walking[j] else 1.0, 1.0 / tau, inv_dt)
                nl += 1
            if rbr > 0.0:
                ddx = rbx - pos[i, 0]
                ddy = rby - pos[i, 1]
                if ddx * ddx + ddy * ddy <= reach2:
                    lines[nl] = _orca_line(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radii[i],
                                           rbx, rby, rbvx, rbvy, rbr, 1.0, 1.0 / tau, inv_dt)
                    nl += 1
            _solve(lines, nl, n_hard, speed[i], pref[i, 0], pref[i, 1], &rx, &ry)
            res[i, 0] = rx
            res[i, 1] = ry
    return out


def commit_positions(occupied, double cell_size, old_in, proposed, radii_in, robot):
    cdef const cnp.uint8_t[:, ::1] occ = np.ascontiguousarray(occupied, dtype=np.uint8)
    cdef const double[:, ::1] old = np.ascontiguousarray(old_in, dtype=np.float64).reshape(-1, 2)
    cdef const double[::1] radii = np.ascontiguousarray(radii_in, dtype=np.float64)
    out = np.array(proposed, dtype=np.float64, copy=True).reshape(-1, 2)
    cdef double[:, ::1] new = out
    cdef Py_ssize_t n = old.shape[0], i, j, k
    cdef double rx = robot[0], ry = robot[1], rr = robot[2], d
    cdef bint changed = True
    cdef cnp.uint8_t* moved = <cnp.uint8_t*> malloc(n + 1)
    with nogil:
        for i in range(n):
            moved[i] = new[i, 0] != old[i, 0] or new[i, 1] != old[i, 1]
            if not moved[i]:
                continue
            if not _disc_free(occ, cell_size, new[i, 0], new[i, 1], radii[i]):
                new[i, 0] = old[i, 0]
                new[i, 1] = old[i, 1]
                moved[i] = 0
            elif rr > 0.0 and hypot(new[i, 0] - rx, new[i, 1] - ry) < radii[i] + rr + EPS:
                new[i, 0] = old[i, 0]
                new[i, 1] = old[i, 1]
                moved[i] = 0
        while changed:
            changed = False
            for i in range(n):
                for j in range(i + 1, n):
                    if not (moved[i] or moved[j]):
                        continue
                    d = hypot(new[i, 0] - new[j, 0], new[i, 1] - new[j, 1])
                    if d < radii[i] + radii[j] + EPS:
                        if moved[i]:
                            new[i, 0] = old[i, 0]
                            new[i, 1] = old[i, 1]
                            moved[i] = 0
                        if moved[j]:
                            new[j, 0] = old[j, 0]
                            new[j, 1] = old[j, 1]
                            moved[j] = 0
                        changed = True
    cfree(moved)
    return out


cdef inline double _field_at(const double[:, ::1] field, double cs, double x, double y) noexcept nogil:
    cdef Py_ssize_t col = <Py_ssize_t> floor(x / cs), row = <Py_ssize_t> floor(y / cs)
    if row < 0 or row >= field.shape[0] or col < 0 or col >= field.shape[1]:
        return INFINITY
    return field[row, col]


def descent_direction(field_in, double cell_size, double x, double y, double lookahead, int n_dirs):
    cdef const double[:, ::1] field = np.ascontiguousarray(field_in, dtype=np.float64)
    cdef double here = _field_at(field, cell_size, x, y)
    cdef double best = here, bdx = 0.0, bdy = 0.0, a, dx, dy, t, v
    cdef int n_samples = <int> ceil(lookahead / (0.5 * cell_size))
    cdef int k, s
    cdef bint ok
    if n_samples < 1:
        n_samples = 1
    for k in range(n_dirs):
        a = 2.0 * M_PI * k / n_dirs
        dx = cos(a)
        dy = sin(a)
        ok = True
        for s in range(1, n_samples + 1):
            t = lookahead * s / n_samples
            if not isfinite(_field_at(field, cell_size, x + t * dx, y + t * dy)):
                ok = False
                break
        if not ok:
            continue
        v = _field_at(field, cell_size, x + lookahead * dx, y + lookahead * dy)
        if v < best - EPS:
            best = v
            bdx = dx
            bdy = dy
    return (bdx, bdy)
