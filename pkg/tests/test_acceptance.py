"""End-to-end acceptance checks with explicit budgets.

Each test prints one PASS/FAIL line so the suite output doubles as an
acceptance report. Tolerances and time budgets are asserted, not advisory.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np

from snaketrack.image import (
    EXTERNAL_ENERGY,
    Image,
    ScalarField,
    box_sum,
    integral_image,
)
from snaketrack.snake import (
    NEIGHBOR_SCAN,
    Contour,
    ExplorerAgent,
    SnakeParams,
    SupervisorState,
    external_energy,
    init_agents,
    internal_energy,
    propose_move,
    run_segmentation,
    step,
    total_energy,
)
from snaketrack.surf import (
    DetectorParams,
    KeyPoint,
    describe_keypoints,
    detect_keypoints,
    match_descriptors,
    select_extremity_points,
)
from snaketrack.tracking import init_tracking, track_frame
from snaketrack import synth


def report(num, name, ok, detail=""):
    line = f"[acceptance] criterion {num} ({name}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def seed_kp(x, y):
    return KeyPoint(x=float(x), y=float(y), scale=2.0, response=1.0,
                    laplacian_sign=1)


def test_criterion_1_box_sums_match_brute_force():
    t0 = time.perf_counter()
    rng = np.random.RandomState(11)
    bad = 0
    total = 0
    for _ in range(100):
        w = rng.randint(3, 17)
        h = rng.randint(3, 17)
        arr = rng.random_sample((h, w))
        ii = integral_image(Image(pixels=arr))
        xs = rng.randint(-2, w + 2, size=(1000, 2))
        ys = rng.randint(-2, h + 2, size=(1000, 2))
        for (x0, x1), (y0, y1) in zip(xs, ys):
            cx0, cy0 = max(x0, 0), max(y0, 0)
            cx1, cy1 = min(x1, w - 1), min(y1, h - 1)
            if cx0 > cx1 or cy0 > cy1:
                expect = 0.0
            else:
                expect = float(arr[cy0:cy1 + 1, cx0:cx1 + 1].sum())
            got = box_sum(ii, int(x0), int(y0), int(x1), int(y1))
            total += 1
            if abs(got - expect) > 1e-12 * max(1.0, abs(expect)):
                bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and total == 100_000 and elapsed < 5.0
    report(1, "integral image box sums", ok,
           f"{total} rects, {bad} mismatches, {elapsed:.2f}s")


def test_criterion_2_energy_never_increases():
    t0 = time.perf_counter()
    rng = np.random.RandomState(42)
    params = SnakeParams()
    failures = []
    for run in range(20):
        w = h = int(rng.randint(24, 48))
        field = ScalarField(values=-rng.random_sample((h, w)),
                            kind=EXTERNAL_ENERGY)
        seeds = [seed_kp(rng.randint(0, w), rng.randint(0, h))
                 for _ in range(8)]
        state = init_agents(seeds, params.min_contour_size, w, h)
        state.current_energy = total_energy(state, state.positions(),
                                            field, params)
        state.energy_history.append(state.current_energy)
        while not state.converged:
            step(state, field, params)
        hist = state.energy_history
        monotone = all(b <= a for a, b in zip(hist, hist[1:]))
        if not (monotone and state.iteration <= params.max_iters):
            failures.append(run)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30.0
    report(2, "energy monotonicity over randomized runs", ok,
           f"20 runs, failures {failures}, {elapsed:.2f}s")


def test_criterion_3_greedy_move_matches_exhaustive_oracle():
    t0 = time.perf_counter()
    rng = np.random.RandomState(99)
    alphas = (0.0, 0.05, 0.25)
    betas = (0.0, 0.01, 0.1)
    mismatches = 0
    checks = 0
    for case in range(50):
        w = h = 24
        vals = -rng.randint(0, 1025, size=(h, w)) / 1024.0
        field = ScalarField(values=vals, kind=EXTERNAL_ENERGY)
        n = int(rng.randint(5, 11))
        flat = rng.choice(w * h, size=n, replace=False)
        params = SnakeParams(alpha=alphas[case % 3],
                             beta=betas[(case // 3) % 3])
        agents = {i: ExplorerAgent(id=i, x=int(flat[i] % w),
                                   y=int(flat[i] // w), contour_id=0)
                  for i in range(n)}
        state = SupervisorState(
            width=w, height=h,
            contours={0: Contour(id=0, agent_ids=list(range(n)))},
            agents=agents, next_agent_id=n, next_contour_id=1,
            initial_agent_count=n)
        for aid in range(n):
            agent = state.agents[aid]
            got = propose_move(agent, state, field, params)
            # oracle: full energy recomputation at all nine candidates,
            # first strict minimum in scan order wins
            home = agent.pos
            best, best_e = None, math.inf
            for dx, dy in NEIGHBOR_SCAN:
                x, y = home[0] + dx, home[1] + dy
                if not (0 <= x < w and 0 <= y < h):
                    continue
                pos = state.positions()
                pos[aid] = (x, y)
                c = state.contours[0]
                e = (internal_energy(c, pos, params.alpha, params.beta)
                     + external_energy(c, pos, field))
                if e < best_e:
                    best, best_e = (x, y), e
            checks += 1
            if got != best:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and checks >= 250 and elapsed < 5.0
    report(3, "greedy move vs exhaustive oracle", ok,
           f"{checks} agent checks, {mismatches} mismatches, {elapsed:.2f}s")


def test_criterion_4_disk_segmentation_accuracy():
    t0 = time.perf_counter()
    img = Image(pixels=synth.disk_image(128, 128))
    ii = integral_image(img)
    kps = detect_keypoints(ii, DetectorParams())
    describe_keypoints(ii, kps)
    sel = select_extremity_points(kps, 128, 128)
    result = run_segmentation(img, sel.points, SnakeParams())
    radius = 0.3 * 128
    errs = []
    for c in result.contours:
        for x, y in c.points:
            d = math.hypot(x + 0.5 - 64.0, y + 0.5 - 64.0)
            errs.append(abs(d - radius))
    rms = math.sqrt(sum(e * e for e in errs) / len(errs)) if errs else math.inf
    within = sum(1 for e in errs if e <= 3.0) / len(errs) if errs else 0.0
    elapsed = time.perf_counter() - t0
    ok = bool(errs) and rms <= 2.5 and within >= 0.9 and elapsed < 5.0
    report(4, "disk segmentation accuracy", ok,
           f"{len(errs)} points, rms {rms:.3f}px, {within:.0%} within 3px, "
           f"{elapsed:.2f}s")


SIZE5 = 192
YS5, XS5 = np.mgrid[0:SIZE5, 0:SIZE5].astype(np.float64)


def blob_field(shift=(0, 0)):
    rng = np.random.RandomState(7)
    img = np.zeros((SIZE5, SIZE5))
    for _ in range(24):
        cx, cy = rng.uniform(40, 152, 2)
        sg = rng.uniform(2, 5)
        amp = rng.uniform(0.4, 1.0)
        img += amp * np.exp(-((XS5 - cx - shift[0]) ** 2
                              + (YS5 - cy - shift[1]) ** 2) / (2 * sg * sg))
    return Image(pixels=np.clip(img, 0.0, 1.0))


def test_criterion_5_keypoint_repeatability_and_self_matching():
    t0 = time.perf_counter()
    params = DetectorParams(hessian_threshold=0.002)
    margin = 27.0
    hi = SIZE5 - 1 - margin

    base_img = blob_field()
    base_ii = integral_image(base_img)
    base = detect_keypoints(base_ii, params)
    base_xy = np.array([(k.x, k.y) for k in base])

    shift_rng = np.random.RandomState(123)
    worst = 1.0
    for _ in range(10):
        dx, dy = (int(v) for v in shift_rng.randint(-8, 9, 2))
        moved = detect_keypoints(integral_image(blob_field((dx, dy))), params)
        hits = 0
        inner = 0
        for kp in moved:
            bx, by = kp.x - dx, kp.y - dy
            if not (margin <= kp.x <= hi and margin <= kp.y <= hi
                    and margin <= bx <= hi and margin <= by <= hi):
                continue
            inner += 1
            d = np.hypot(base_xy[:, 0] - bx, base_xy[:, 1] - by).min()
            if d <= 1.0:
                hits += 1
        frac = hits / inner if inner else 0.0
        worst = min(worst, frac)

    describe_keypoints(base_ii, base)
    matches = match_descriptors(base, base, ratio=params.ratio)
    identity = [m for m in matches
                if m.index_a == m.index_b and m.distance < 1e-6]
    self_frac = len(identity) / len(base) if base else 0.0

    elapsed = time.perf_counter() - t0
    ok = (len(base) >= 10 and worst >= 0.9 and self_frac >= 0.95
          and elapsed < 20.0)
    report(5, "keypoint repeatability under translation", ok,
           f"{len(base)} kps, worst repeat {worst:.1%}, self-match "
           f"{self_frac:.1%}, {elapsed:.2f}s")


def test_criterion_6_square_tracking_accuracy():
    t0 = time.perf_counter()
    detector = DetectorParams(octaves=4)
    snake = SnakeParams(sigma=2.0)
    speed = 2.0
    frames = synth.sequence("translate_square", 96, 96, 10, speed=speed)
    side = 0.4 * 96
    worst = 0.0
    state = None
    for f, arr in enumerate(frames):
        frame = Image(pixels=arr)
        if state is None:
            state, result = init_tracking(frame, detector, snake)
        else:
            state, result = track_frame(state, frame, detector, snake)
        pts = [p for c in result.contours for p in c.points]
        cx = sum(p[0] + 0.5 for p in pts) / len(pts)
        cy = sum(p[1] + 0.5 for p in pts) / len(pts)
        true_x = (96 - side) / 2 + speed * f + side / 2
        true_y = 48.0
        worst = max(worst, math.hypot(cx - true_x, cy - true_y))

    # a static scene must reproduce the previous contour exactly
    still = Image(pixels=synth.square_image(96, 96))
    s0, r0 = init_tracking(still, detector, snake)
    s1, r1 = track_frame(s0, still, detector, snake)
    fixed = ([c.points for c in r1.contours] == [c.points for c in r0.contours]
             and s1.global_offset == (0.0, 0.0))

    elapsed = time.perf_counter() - t0
    ok = worst <= 2.0 and fixed and elapsed < 30.0
    report(6, "square tracking accuracy", ok,
           f"worst centroid error {worst:.2f}px, static fixed point {fixed}, "
           f"{elapsed:.2f}s")


def test_criterion_7_collision_split_bookkeeping():
    t0 = time.perf_counter()
    vals = np.zeros((32, 32))
    vals[16, 16] = -1.0  # single energy well both arcs race toward
    field = ScalarField(values=vals, kind=EXTERNAL_ENERGY)
    params = SnakeParams(alpha=0.0, beta=0.0, max_spacing=0.0)
    seeds = [seed_kp(16, 15), seed_kp(18, 14), seed_kp(18, 16),
             seed_kp(18, 18), seed_kp(16, 17), seed_kp(14, 18),
             seed_kp(14, 16), seed_kp(14, 14)]
    state = init_agents(seeds, params.min_contour_size, 32, 32)
    before = len(state.agents)
    state.current_energy = total_energy(state, state.positions(), field, params)
    state.energy_history.append(state.current_energy)
    while not state.converged:
        step(state, field, params)

    splits = [e for e in state.events if e.kind == "split"]
    discards = [e for e in state.events if e.kind == "discard"]
    sizes = sorted(len(c.agent_ids) for c in state.contours.values())
    conserved = len(state.agents) + sum(len(e.agent_ids) for e in discards) \
        == before
    sized_ok = all(s >= params.min_contour_size for s in sizes)
    hist = state.energy_history
    monotone = all(b <= a for a, b in zip(hist, hist[1:]))

    elapsed = time.perf_counter() - t0
    ok = (len(splits) == 1 and conserved and sized_ok and monotone
          and len(state.contours) == 2 and elapsed < 5.0)
    report(7, "collision split bookkeeping", ok,
           f"splits {len(splits)}, sizes {sizes}, discards {len(discards)}, "
           f"agents {len(state.agents)}/{before}, {elapsed:.2f}s")


def test_criterion_8_cli_end_to_end(tmp_path):
    t0 = time.perf_counter()
    frames_dir = tmp_path / "frames"
    out_dir = tmp_path / "out"
    n_frames = 6

    def run(*argv):
        return subprocess.run([sys.executable, "-m", "snaketrack", *argv],
                              capture_output=True, text=True)

    synth_proc = run("synth", "--kind", "translate_square", "--size", "96x96",
                     "--frames", str(n_frames), "--speed", "2", "--out",
                     str(frames_dir))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"input_dir = {frames_dir}\n"
        f"output_dir = {out_dir}\n"
        "sigma = 2.0\n"
        "octaves = 4\n")
    first = run("run", "--config", str(cfg))
    contours_1 = (out_dir / "contours.jsonl").read_bytes()
    metrics_1 = (out_dir / "metrics.csv").read_bytes()

    records = [json.loads(line) for line in
               contours_1.decode().splitlines()]
    frames_ok = True
    for f in range(n_frames):
        per = [r for r in records if r["frame"] == f]
        kinds = [r["type"] for r in per]
        if not (kinds.count("contour") >= 1 and kinds.count("events") == 1
                and kinds.count("energy") == 1):
            frames_ok = False
    data_rows = [l for l in metrics_1.decode().splitlines()
                 if l and not l.startswith("#")]
    rows_ok = len(data_rows) == n_frames + 1  # column header + one per frame

    second = run("run", "--config", str(cfg))
    identical = (contours_1 == (out_dir / "contours.jsonl").read_bytes()
                 and metrics_1 == (out_dir / "metrics.csv").read_bytes())

    elapsed = time.perf_counter() - t0
    ok = (synth_proc.returncode == 0 and first.returncode == 0
          and second.returncode == 0 and frames_ok and rows_ok and identical
          and elapsed < 30.0)
    report(8, "batch CLI end to end", ok,
           f"exits {synth_proc.returncode}/{first.returncode}/"
           f"{second.returncode}, records ok {frames_ok}, rows ok {rows_ok}, "
           f"rerun identical {identical}, {elapsed:.2f}s")
