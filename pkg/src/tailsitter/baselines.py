"""Fixed-wing comparison methods on a constant-speed planar unicycle.

Dubins shortest paths (six words) and the L1 nonlinear guidance law, plus
a simulator that records the yaw rate so its discontinuities can be
counted. Headings are measured from +x toward +y; positive turn rates
(``L`` arcs) are counter-clockwise in that frame.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2 * np.pi)
    return float(w) if w.ndim == 0 else w


def _mod2pi(a):
    return float(np.mod(a, 2 * np.pi))


@dataclass(frozen=True)
class PlanarPose:
    x: float
    y: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "psi", float(wrap_angle(self.psi)))

    @property
    def xy(self):
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class DubinsPath:
    """Shortest bounded-curvature path as three primitives.

    ``params`` are the normalised segment lengths (arc angles in rad for
    turns, distance / r_turn for the straight), so ``length`` is
    ``r_turn * sum(params)``.
    """

    start: PlanarPose
    word: str
    params: tuple
    r_turn: float

    @property
    def segment_lengths(self):
        return tuple(self.r_turn * p for p in self.params)

    @property
    def length(self):
        return float(sum(self.segment_lengths))

    def sample(self, s):
        """Pose at arclength ``s`` (clamped to the path)."""
        s = float(np.clip(s, 0.0, self.length))
        x, y, psi = self.start.x, self.start.y, self.start.psi
        for kind, seg in zip(self.word, self.segment_lengths):
            d = min(s, seg)
            x, y, psi = _advance(x, y, psi, d, _curvature(kind, self.r_turn))
            s -= d
            if s <= 0:
                break
        return PlanarPose(x, y, psi)

    def turn_rate(self, s, V):
        """Yaw rate at arclength ``s`` when flown at speed V (left segment at joints)."""
        ends = np.cumsum(self.segment_lengths)
        i = min(int(np.searchsorted(ends, s, side="left")), 2)
        return V * _curvature(self.word[i], self.r_turn)

    @property
    def boundaries(self):
        """Arclengths of the internal primitive switches with nonzero length."""
        out, acc = [], 0.0
        for seg in self.segment_lengths[:-1]:
            acc += seg
            out.append(acc)
        return out


def _curvature(kind, r):
    return {"L": 1.0 / r, "R": -1.0 / r, "S": 0.0}[kind]


def _advance(x, y, psi, d, kappa):
    """Exact constant-curvature motion over arclength d."""
    if abs(kappa) < 1e-15:
        return x + d * np.cos(psi), y + d * np.sin(psi), psi
    dpsi = kappa * d
    x += (np.sin(psi + dpsi) - np.sin(psi)) / kappa
    y += (np.cos(psi) - np.cos(psi + dpsi)) / kappa
    return x, y, psi + dpsi


def _word_params(word, alpha, beta, d):
    """Closed-form normalised segment lengths for one word, or None."""
    sa, sb, ca, cb = np.sin(alpha), np.sin(beta), np.cos(alpha), np.cos(beta)
    cab = np.cos(alpha - beta)
    if word == "LSL":
        p2 = 2 + d * d - 2 * cab + 2 * d * (sa - sb)
        if p2 < 0:
            return None
        tmp = np.arctan2(cb - ca, d + sa - sb)
        return _mod2pi(-alpha + tmp), np.sqrt(p2), _mod2pi(beta - tmp)
    if word == "RSR":
        p2 = 2 + d * d - 2 * cab + 2 * d * (sb - sa)
        if p2 < 0:
            return None
        tmp = np.arctan2(ca - cb, d - sa + sb)
        return _mod2pi(alpha - tmp), np.sqrt(p2), _mod2pi(-beta + tmp)
    if word == "LSR":
        p2 = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
        if p2 < 0:
            return None
        p = np.sqrt(p2)
        tmp = np.arctan2(-ca - cb, d + sa + sb) - np.arctan2(-2.0, p)
        return _mod2pi(-alpha + tmp), p, _mod2pi(-_mod2pi(beta) + tmp)
    if word == "RSL":
        p2 = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
        if p2 < 0:
            return None
        p = np.sqrt(p2)
        tmp = np.arctan2(ca + cb, d - sa - sb) - np.arctan2(2.0, p)
        return _mod2pi(alpha - tmp), p, _mod2pi(beta - tmp)
    if word == "RLR":
        tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
        if abs(tmp) > 1:
            return None
        p = _mod2pi(2 * np.pi - np.arccos(tmp))
        t = _mod2pi(alpha - np.arctan2(ca - cb, d - sa + sb) + p / 2)
        return t, p, _mod2pi(alpha - beta - t + p)
    if word == "LRL":
        tmp = (6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0
        if abs(tmp) > 1:
            return None
        p = _mod2pi(2 * np.pi - np.arccos(tmp))
        t = _mod2pi(-alpha - np.arctan2(ca - cb, d + sa - sb) + p / 2)
        return t, p, _mod2pi(_mod2pi(beta) - alpha - t + p)
    raise DomainError(f"unknown Dubins word {word!r}")


def dubins_word(start, goal, r_turn, word):
    """The path of one specific word, or None if it does not exist."""
    dx, dy = goal.x - start.x, goal.y - start.y
    D = np.hypot(dx, dy)
    d = D / r_turn
    theta = _mod2pi(np.arctan2(dy, dx)) if D > 0 else 0.0
    alpha = _mod2pi(start.psi - theta)
    beta = _mod2pi(goal.psi - theta)
    params = _word_params(word, alpha, beta, d)
    if params is None:
        return None
    return DubinsPath(start, word, tuple(float(p) for p in params), float(r_turn))


def dubins_shortest(start, goal, r_turn):
    """Minimum-length Dubins path among the six words."""
    if not r_turn > 0:
        raise DomainError("turn radius must be positive")
    best = None
    for w in WORDS:
        path = dubins_word(start, goal, r_turn, w)
        if path is not None and (best is None or path.length < best.length - 1e-12):
            best = path
    return best


def waypoint_headings(points, start_heading=None, goal_heading=None):
    """Headings at each waypoint: chord direction at the ends, bisector inside."""
    pts = np.asarray(points, dtype=float)
    chords = np.diff(pts, axis=0)
    ang = np.arctan2(chords[:, 1], chords[:, 0])
    out = [ang[0] if start_heading is None else start_heading]
    for a0, a1 in zip(ang[:-1], ang[1:]):
        out.append(a0 + 0.5 * wrap_angle(a1 - a0))
    out.append(ang[-1] if goal_heading is None else goal_heading)
    return np.array(out)


def dubins_chain(points, r_turn, headings=None):
    """Shortest Dubins path between consecutive waypoints with given headings."""
    pts = np.asarray(points, dtype=float)
    hd = waypoint_headings(pts) if headings is None else np.asarray(headings, dtype=float)
    return [
        dubins_shortest(PlanarPose(*pts[i], hd[i]), PlanarPose(*pts[i + 1], hd[i + 1]), r_turn)
        for i in range(len(pts) - 1)
    ]


# ---------------------------------------------------------------------------
# L1 guidance


@dataclass
class L1Guidance:
    """L1 path follower over a waypoint polyline with acceptance-radius switching."""

    waypoints: np.ndarray
    L1: float = 10.0
    acceptance_radius: float = 2.0
    segment: int = 0
    switch_times: list = field(default_factory=list)
    fallbacks: int = 0

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if len(self.waypoints) < 2:
            raise DomainError("L1 guidance needs at least two waypoints")
        if not self.L1 > 0 or not self.acceptance_radius > 0:
            raise DomainError("L1 and acceptance radius must be positive")

    @property
    def done(self):
        return self.segment >= len(self.waypoints) - 1

    def update_segment(self, pos, t=0.0):
        """Advance past waypoints within the acceptance radius or already overflown."""
        while not self.done:
            a, b = self.waypoints[self.segment], self.waypoints[self.segment + 1]
            seg = b - a
            along = float((pos - a) @ seg) / float(seg @ seg)
            last = self.segment == len(self.waypoints) - 2
            near = np.linalg.norm(pos - b) < self.acceptance_radius
            # the final waypoint is reached only when it has been passed
            if along >= 1.0 or (near and not last):
                self.segment += 1
                self.switch_times.append(t)
            else:
                break

    def reference_point(self, pos):
        """Forward intersection of the L1 circle with the active segment."""
        a, b = self.waypoints[self.segment], self.waypoints[self.segment + 1]
        seg = b - a
        L = np.linalg.norm(seg)
        u = seg / L
        rel = pos - a
        along = float(rel @ u)
        cross_track = float(u[0] * rel[1] - u[1] * rel[0])
        if abs(cross_track) > self.L1:
            self.fallbacks += 1
            warnings.warn("vehicle farther than L1 from the path; steering to nearest point", stacklevel=3)
            return a + np.clip(along, 0.0, L) * u
        ahead = along + np.sqrt(self.L1**2 - cross_track**2)
        if self.segment < len(self.waypoints) - 2:
            ahead = min(ahead, L)
        # on the final leg the point runs past the goal so the approach stays straight
        return a + ahead * u

    def command(self, pose, V):
        """Lateral acceleration 2 V^2 sin(eta) / L1 (positive turns left)."""
        pos = pose.xy
        ref = self.reference_point(pos)
        los = ref - pos
        eta = wrap_angle(np.arctan2(los[1], los[0]) - pose.psi)
        return l1_acceleration(V, eta, self.L1)


def l1_acceleration(V, eta, L1):
    if not V > 0 or not L1 > 0:
        raise DomainError("speed and L1 must be positive")
    return 2.0 * V * V * np.sin(eta) / L1


def l1_guidance(pose, V, path, L1=10.0, segment=0):
    """Stateless L1 command for ``pose`` following segment ``segment`` of ``path``."""
    g = L1Guidance(np.asarray(path, dtype=float), L1=L1, segment=segment)
    return g.command(pose, V)


# ---------------------------------------------------------------------------
# planar simulation


@dataclass
class PlanarTrace:
    times: np.ndarray
    poses: np.ndarray
    yaw_rates: np.ndarray
    speed: float
    events: list = field(default_factory=list)

    @property
    def duration(self):
        return float(self.times[-1])

    @property
    def velocities(self):
        return self.speed * np.column_stack([np.cos(self.poses[:, 2]), np.sin(self.poses[:, 2])])

    def yaw_rate_jumps(self, threshold):
        """Times where |d(yaw rate)| between samples exceeds ``threshold``."""
        d = np.abs(np.diff(self.yaw_rates))
        idx = np.nonzero(d > threshold)[0]
        return self.times[idx + 1]


def simulate_planar(controller, start, V, dt, t_end):
    """Integrate the unicycle x' = V cos psi, y' = V sin psi, psi' = a / V.

    ``controller(pose, t)`` returns the lateral acceleration or None to
    stop. Each step applies the command as an exact constant turn.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    pose = start
    times, poses, rates = [0.0], [(pose.x, pose.y, pose.psi)], []
    t = 0.0
    while t < t_end - 1e-12:
        a = controller(pose, t)
        if a is None:
            break
        rate = a / V
        h = min(dt, t_end - t)
        x, y, psi = _advance(pose.x, pose.y, pose.psi, V * h, rate / V)
        pose = PlanarPose(x, y, psi)
        t += h
        times.append(t)
        poses.append((x, y, pose.psi))
        rates.append(rate)
    rates.append(rates[-1] if rates else 0.0)
    return PlanarTrace(np.array(times), np.array(poses), np.array(rates), V)


def dubins_controller(paths, V):
    """Open-loop feed-forward that flies a Dubins chain by arclength."""
    lengths = np.array([p.length for p in paths])
    ends = np.cumsum(lengths)

    def ctrl(pose, t):
        s = V * t
        if s >= ends[-1] - 1e-9:
            return None
        i = int(np.searchsorted(ends, s, side="right"))
        s_local = s - (ends[i - 1] if i else 0.0)
        return V * paths[i].turn_rate(s_local + 1e-12, V)

    return ctrl


def fly_dubins(paths, V, dt=0.01):
    total = sum(p.length for p in paths)
    trace = simulate_planar(dubins_controller(paths, V), paths[0].start, V, dt, total / V + dt)
    acc = 0.0
    for p in paths:
        for b in p.boundaries:
            trace.events.append((acc + b) / V)
        acc += p.length
        trace.events.append(acc / V)
    trace.events = trace.events[:-1]
    return trace


def fly_l1(waypoints, V, L1=10.0, acceptance_radius=2.0, dt=0.01, t_max=None, start=None):
    """Fly the polyline with L1 guidance until the last waypoint is reached."""
    wps = np.asarray(waypoints, dtype=float)
    guide = L1Guidance(wps, L1, acceptance_radius)
    if start is None:
        d = wps[1] - wps[0]
        start = PlanarPose(wps[0, 0], wps[0, 1], np.arctan2(d[1], d[0]))
    length = float(np.sum(np.linalg.norm(np.diff(wps, axis=0), axis=1)))
    t_max = 5.0 * length / V + 10.0 if t_max is None else t_max

    def ctrl(pose, t):
        guide.update_segment(pose.xy, t)
        if guide.done:
            return None
        return guide.command(pose, V)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = simulate_planar(ctrl, start, V, dt, t_max)
    trace.events = list(guide.switch_times[:-1])
    return trace
