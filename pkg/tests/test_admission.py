from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import rtbatch.admission as adm
from rtbatch.admission import (EdfImitator, PseudoJob, admit, capture_state, edf_imitator,
                               generate_pseudo_jobs, phase1)
from rtbatch.core import BatchKey, Category, Shape
from rtbatch.errors import UnsortedInput
from rtbatch.harness.engine import (DeepRT, SimOptions, prediction_mismatches,
                                    run_simulation)
from rtbatch.profile import SynthRow, reference_profile, synth_profile
from rtbatch.system import LiveSystem

from conftest import RN50, VGG, affine, req
from oracles import J, edf_schedule

KEY = BatchKey(RN50, True)


def pj(r, d_abs, e, tb=()):
    return PseudoJob(r, d_abs, e, KEY, tb)


# -- phase 1 ---------------------------------------------------------------

def test_phase1_affine_example():
    prof = affine(base=2_000, per=1_000, max_batch=8)
    rep = phase1(prof, [req("a", 50_000, 100_000, 10)], req("b", 25_000, 100_000, 10))
    load = rep.per_category[KEY]
    assert (load.window_us, load.n_frames) == (50_000, 3)
    assert load.utilization == Fraction(1, 10) and rep.passed


def test_phase1_rn50_reference():
    # published solo latency: ResNet50 batch 1 at 3x224x224 -> 3.5 ms
    prof = reference_profile([Shape(3, 224, 224)])
    rep = phase1(prof, [], req("a", 10_000, 20_000, 5))
    assert rep.per_category[KEY].n_frames == 1
    assert rep.total == Fraction(35, 100) and rep.passed


def test_phase1_threshold():
    prof = synth_profile([SynthRow("rn50", RN50.shape, 6_000, 1_000, 4),
                          SynthRow("vgg16", VGG.shape, 3_000, 1_000, 4)])
    rep = phase1(prof, [req("a", 10_000, 20_000, 5)], req("b", 10_000, 20_000, 5, cat=VGG))
    assert rep.total == Fraction(11, 10) and not rep.passed


def test_phase1_zero_frames_contribute_nothing():
    rep = phase1(affine(), [], req("a", 100_000, 20_000, 5))
    assert rep.per_category[KEY].n_frames == 0 and rep.total == 0


# -- snapshot ----------------------------------------------------------------

def test_capture_empty():
    snap = capture_state(LiveSystem(affine()))
    assert snap.categories == () and snap.queued == () and snap.running is None
    assert snap.requests == ()


def test_capture_counts_and_purity():
    prof = affine()
    sys_ = LiveSystem(prof)
    r = req("a", 10_000, 100_000, 10)
    sys_.register(r)
    sys_.release_frame("a")
    sys_.now = 10_000
    sys_.release_frame("a")
    sys_.queue.push(sys_.batcher._make_jobs(sys_.batcher.state_of("a"),
                                            [r.frame(9)], 10_000, 50_000)[0])
    s1 = capture_state(sys_)
    s2 = capture_state(sys_)
    assert s1 == s2
    assert s1.pending_counts == {KEY: 2} and len(s1.queued) == 1
    assert len(sys_.batcher.state_of("a").pending_frames) == 2


def test_rejected_request_leaves_no_trace():
    prof = affine()
    sys_ = LiveSystem(prof)
    sys_.register(req("a", 10_000, 100_000, 10))
    before = capture_state(sys_)
    res = admit(sys_, prof, req("b", 10, 10, 100))
    assert not res.admitted
    assert capture_state(sys_) == before


# -- pseudo jobs -------------------------------------------------------------

def test_pseudo_jobs_single_request():
    snap = capture_state(LiveSystem(affine()))
    jobs = generate_pseudo_jobs(snap, req("a", 25_000, 100_000, 4), affine())
    assert [(j.release_us, j.deadline_us, len(j.frames)) for j in jobs] == [
        (50_000, 100_000, 2), (100_000, 150_000, 2)]


def test_pseudo_jobs_merge_by_release():
    prof = affine("rn50", "vgg16")
    sys_ = LiveSystem(prof)
    sys_.register(req("a", 30_000, 60_000, 6))
    jobs = generate_pseudo_jobs(capture_state(sys_), req("b", 20_000, 100_000, 8, cat=VGG), prof)
    rel = [j.release_us for j in jobs]
    assert rel == sorted(rel)
    assert {j.key.category for j in jobs} == {RN50, VGG}


def test_pseudo_jobs_follow_a_window_shrink():
    prof = affine()
    sys_ = LiveSystem(prof)
    sys_.register(req("a", 10_000, 200_000, 30))
    sys_.release_frame("a")
    sys_.now = 10_000
    sys_.release_frame("a")
    sys_.now = 15_000
    jobs = generate_pseudo_jobs(capture_state(sys_), req("b", 10_000, 40_000, 3, first=15_000),
                                prof)
    # pending frames flushed at 15 000, then joints every 20 000 from there
    assert jobs[0].release_us == 15_000 and jobs[0].deadline_us == 35_000
    assert [j.release_us for j in jobs[1:4]] == [35_000, 55_000, 75_000]
    assert all((j.release_us - 15_000) % 20_000 == 0 for j in jobs)


# -- imitator ----------------------------------------------------------------

def test_imitator_example_two_jobs():
    a, b = pj(0, 5, 3, (0,)), pj(1, 11, 3, (1,))
    res = edf_imitator([], [a, b])
    assert res.schedulable and res.finish == {a.ident: 3, b.ident: 6}


def test_imitator_single_job_too_long():
    assert not edf_imitator([], [pj(0, 5, 6)]).schedulable


def test_imitator_idle_gap():
    a, b = pj(0, 3, 2, (0,)), pj(5, 8, 2, (1,))
    res = edf_imitator([], [a, b])
    assert res.schedulable and res.finish[b.ident] == 7


def test_imitator_unsorted():
    with pytest.raises(UnsortedInput):
        edf_imitator([], [pj(5, 10, 1), pj(0, 10, 1)])


def test_imitator_running_residual_blocks():
    running = pj(0, 100, 10, ("run",))
    queued = pj(0, 12, 5, ("q",))
    res = edf_imitator([queued], [], start_us=3, running=running)
    assert res.finish[running.ident] == 13 and res.finish[queued.ident] == 18
    assert not res.schedulable


jobs_st = st.lists(st.tuples(st.integers(0, 60), st.integers(1, 20), st.integers(0, 60)),
                   min_size=1, max_size=25)


def _sorted_pjobs(raw):
    js = [pj(r, r + d, e, (i,)) for i, (r, e, d) in enumerate(raw)]
    js.sort(key=lambda j: j.list_order)
    return js


@given(jobs_st)
def test_imitator_matches_oracle_finish_times(raw):
    js = _sorted_pjobs(raw)
    res = edf_imitator([], js, stop_at_miss=False)
    ok, fin = edf_schedule([J(j.release_us, j.deadline_us, j.wcet_us, j.tiebreak) for j in js])
    assert res.schedulable == ok
    assert [res.finish[j.ident] for j in js] == fin


@given(jobs_st, st.lists(st.integers(0, 25), max_size=4))
def test_imitator_split_invariance(raw, cuts):
    js = _sorted_pjobs(raw)
    whole = edf_imitator([], js, stop_at_miss=False)
    imi = EdfImitator(0, stop_at_miss=False)
    prev = 0
    for c in sorted(min(c, len(js)) for c in cuts) + [len(js)]:
        imi.feed(js[prev:c])
        prev = c
    part = imi.close()
    assert part.finish == whole.finish and part.schedulable == whole.schedulable


# -- admit -------------------------------------------------------------------

def test_admit_tiny_request():
    prof = affine()
    res = admit(LiveSystem(prof), prof, req("a", 100_000, 100_000, 3))
    assert res.admitted and res.decision == "admitted"
    assert res.predicted_max_latency_us is not None


def test_admit_rejects_job_longer_than_window():
    prof = affine(base=2_000, per=1_000)
    res = admit(LiveSystem(prof), prof, req("a", 100_000, 4_000, 3))
    assert not res.admitted and res.phase == 2


def test_admit_phase1_short_circuits(monkeypatch):
    prof = synth_profile([SynthRow("rn50", RN50.shape, 15_000, 0, 4)])
    called = []
    monkeypatch.setattr(adm, "phase2", lambda *a: called.append(1))
    res = admit(LiveSystem(prof), prof, req("a", 10_000, 20_000, 5))
    assert res.decision == "rejected(1)" and res.utilization == Fraction(3, 2)
    assert called == []


def test_admit_unknown_category_rejects():
    prof = affine()
    res = admit(LiveSystem(prof), prof,
                req("a", 10_000, 20_000, 5, cat=Category("nope", Shape(1, 1, 1))))
    assert not res.admitted and res.phase == 1 and "no profile entry" in res.reason


trace_st = st.lists(st.tuples(st.integers(0, 300_000), st.integers(5_000, 60_000),
                              st.integers(8_000, 120_000), st.integers(1, 12), st.booleans()),
                    min_size=1, max_size=7)


@given(trace_st)
def test_admitted_runs_match_predictions_and_never_miss(specs):
    prof = affine("rn50", "vgg16", base=1_000, per=700, max_batch=4)
    trace = [req(f"r{i}", p, d, n, first=f, cat=VGG if c else RN50)
             for i, (f, p, d, n, c) in enumerate(specs)]
    m = run_simulation(trace, DeepRT(), prof,
                       options=SimOptions(early_dispatch=False, adaptation=False))
    assert m.missed == 0
    assert prediction_mismatches(m) == []
