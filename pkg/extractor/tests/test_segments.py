import numpy as np
import pytest

from cdc_extract.segments import (SegmentError, check_plan, plan_segments)


def test_exact_fit_and_remainder():
    # 900 single-piece tokens under a 512 limit: windows of 512 and 388
    plan = plan_segments("doc", [1] * 900, 512)
    assert [seg.n_pieces for seg in plan.segments] == [512, 388]
    assert [(s.token_start, s.token_end) for s in plan.segments] == \
           [(0, 512), (512, 900)]
    check_plan(plan, 512)


def test_boundary_shifts_backward_at_token():
    # 5-piece tokens: 102 tokens fit 510 pieces; the 103rd would split
    plan = plan_segments("doc", [5] * 150, 512)
    assert plan.segments[0].n_pieces == 510
    assert plan.segments[0].token_end == 102
    check_plan(plan, 512)
    # no window splits a token: every boundary is a multiple of 5 pieces
    assert all(seg.piece_start % 5 == 0 for seg in plan.segments)


def test_single_window_document():
    plan = plan_segments("doc", [3, 2, 1], 512)
    assert len(plan.segments) == 1
    assert plan.segments[0].n_pieces == 6
    check_plan(plan, 512)


def test_oversized_token_is_an_error():
    with pytest.raises(SegmentError, match="alone has"):
        plan_segments("doc", [1, 600, 1], 512)
    with pytest.raises(SegmentError, match="no word pieces"):
        plan_segments("doc", [1, 0, 1], 512)
    with pytest.raises(SegmentError, match="positive"):
        plan_segments("doc", [1], 0)


def test_random_plans_hold_invariants():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(1, 120))
        limit = int(rng.integers(4, 40))
        counts = [int(rng.integers(1, limit + 1)) for _ in range(n)]
        plan = plan_segments("doc", counts, limit)
        check_plan(plan, limit)
        # windows are greedy-maximal: adding the next token would overflow
        for seg, following in zip(plan.segments, plan.segments[1:]):
            assert seg.n_pieces + counts[following.token_start] > limit


def test_check_plan_rejects_tampering():
    plan = plan_segments("doc", [2, 2, 2], 4)
    bad = plan.segments[0].__class__(0, 1, 0, 3)  # splits token 1's pieces
    tampered = plan.__class__(plan.doc_id, plan.pieces_per_token,
                              (bad,) + plan.segments[1:])
    with pytest.raises(SegmentError):
        check_plan(tampered, 4)
