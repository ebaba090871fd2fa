import math

import numpy as np
import pytest
import torch

from anchorspot.losses import (
    CTC_INFEASIBLE_PENALTY,
    LossNaNError,
    LossParts,
    LossWeights,
    ctc_loss,
    ctc_loss_batch,
    ctc_required_length,
    dice_loss,
    iou_box_loss,
    mask_loss,
    sampling_l1_loss,
    total_loss,
)
from oracles import ctc_nll_bruteforce


def t(x, dtype=torch.float64):
    return torch.tensor(x, dtype=dtype)


class TestDiceLoss:
    def test_perfect_match_near_zero(self):
        gt = torch.zeros(8, 8)
        gt[2:5, 2:5] = 1
        assert dice_loss(gt.clone(), gt).item() == pytest.approx(0.0, abs=1e-6)

    def test_total_mismatch(self):
        pred = torch.ones(4, 4)
        gt = torch.zeros(4, 4)
        assert dice_loss(pred, gt).item() == pytest.approx(1.0, abs=1e-6)

    def test_half_confidence(self):
        pred = torch.full((5, 5), 0.5)
        gt = torch.ones(5, 5)
        assert dice_loss(pred, gt).item() == pytest.approx(1 / 3, abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dice_loss(torch.ones(3, 3), torch.ones(4, 4))

    def test_gradient(self):
        pred = torch.rand(6, 6, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
        pred.requires_grad_(True)
        gt = (torch.rand(6, 6, generator=torch.Generator().manual_seed(1)) > 0.5).double()
        loss = dice_loss(pred, gt)
        loss.backward()
        eps = 1e-7
        for idx in [(0, 0), (3, 4), (5, 5)]:
            with torch.no_grad():
                up = pred.clone()
                up[idx] += eps
                down = pred.clone()
                down[idx] -= eps
                numeric = (dice_loss(up, gt) - dice_loss(down, gt)).item() / (2 * eps)
            analytic = pred.grad[idx].item()
            assert abs(analytic - numeric) < 1e-3 * max(1.0, abs(numeric))


class TestIouBoxLoss:
    def test_exact_match(self):
        d = t([[10.0, 20.0, 10.0, 20.0]])
        assert iou_box_loss(d, d).item() == pytest.approx(0.0, abs=1e-12)

    def test_nested_half_height(self):
        gt = t([[10.0, 20.0, 10.0, 20.0]])
        pred = t([[5.0, 20.0, 5.0, 20.0]])
        assert iou_box_loss(pred, gt).item() == pytest.approx(math.log(2), abs=1e-9)

    def test_degenerate_pred_clamped_finite(self):
        gt = t([[10.0, 20.0, 10.0, 20.0]])
        pred = t([[0.0, 0.0, 0.0, 0.0]])
        loss = iou_box_loss(pred, gt)
        assert torch.isfinite(loss).all()
        assert loss.item() == pytest.approx(-math.log(1e-6), rel=1e-6)

    def test_always_overlapping_thus_finite(self):
        rng = np.random.default_rng(0)
        pred = t(rng.uniform(0.1, 50, (100, 4)))
        gt = t(rng.uniform(0.1, 50, (100, 4)))
        assert torch.isfinite(iou_box_loss(pred, gt)).all()

    def test_gradient(self):
        gt = t([[10.0, 20.0, 10.0, 20.0]])
        pred = t([[8.0, 25.0, 12.0, 18.0]]).requires_grad_(True)
        iou_box_loss(pred, gt).sum().backward()
        eps = 1e-6
        for i in range(4):
            with torch.no_grad():
                up = pred.detach().clone()
                up[0, i] += eps
                down = pred.detach().clone()
                down[0, i] -= eps
                numeric = (iou_box_loss(up, gt) - iou_box_loss(down, gt)).item() / (2 * eps)
            assert abs(pred.grad[0, i].item() - numeric) < 1e-3 * max(1.0, abs(numeric))


class TestMaskLoss:
    def test_perfect(self):
        gt = torch.zeros(2, 8, 8)
        gt[:, 1:5, 2:7] = 1
        assert mask_loss(gt.clone(), gt).item() == pytest.approx(0.0, abs=1e-6)

    def test_inverted(self):
        gt = torch.zeros(1, 6, 6)
        gt[0, :3] = 1
        pred = 1 - gt
        assert mask_loss(pred, gt).item() == pytest.approx(1.0, abs=1e-6)

    def test_half_cover(self):
        gt = torch.zeros(1, 4, 8)
        gt[0, :, :] = 1
        pred = torch.zeros(1, 4, 8)
        pred[0, :, :4] = 1
        assert mask_loss(pred, gt).item() == pytest.approx(1 / 3, abs=1e-4)

    def test_empty_anchor_set(self):
        loss = mask_loss(torch.zeros(0, 4, 4), torch.zeros(0, 4, 4))
        assert loss.item() == 0.0


class TestSamplingL1:
    def test_zero(self):
        x = torch.rand(3, 10)
        assert sampling_l1_loss(x, x).item() == 0.0

    def test_uniform_offset(self):
        gt = torch.rand(3, 10)
        assert sampling_l1_loss(gt + 0.5, gt).item() == pytest.approx(0.5, abs=1e-6)

    def test_mixed_signs(self):
        gt = torch.zeros(1, 4)
        pred = t([[1.0, -2.0, 0.5, -0.5]], dtype=torch.float32)
        assert sampling_l1_loss(pred, gt).item() == pytest.approx(1.0)


class TestCtcLoss:
    def test_single_step_single_char(self):
        probs = t([[0.1, 0.9]])  # blank, 'a'
        assert ctc_loss(probs, [1]).item() == pytest.approx(-math.log(0.9), abs=1e-9)

    def test_two_steps_three_paths(self):
        probs = t([[0.5, 0.5], [0.5, 0.5]])
        # paths aa, a-, -a have total probability 0.75
        assert ctc_loss(probs, [1]).item() == pytest.approx(-math.log(0.75), abs=1e-9)

    def test_deterministic_path_zero_loss(self):
        probs = t([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert ctc_loss(probs, [1, 2]).item() == pytest.approx(0.0, abs=1e-6)

    def test_empty_target(self):
        probs = t([[0.7, 0.3], [0.6, 0.4]])
        assert ctc_loss(probs, []).item() == pytest.approx(-math.log(0.42), abs=1e-9)

    def test_infeasible_penalized(self):
        probs = t([[0.5, 0.5]])
        with pytest.warns(UserWarning):
            loss = ctc_loss(probs, [1, 1])
        assert loss.item() == CTC_INFEASIBLE_PENALTY
        assert not loss.requires_grad

    def test_required_length(self):
        assert ctc_required_length([1, 2, 3]) == 3
        assert ctc_required_length([1, 1, 2, 2]) == 6

    def test_matches_bruteforce_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            k = int(rng.integers(1, 5))
            n_cls = int(rng.integers(2, 4))  # blank + up to 3 labels
            probs = rng.dirichlet(np.ones(n_cls + 1), size=k)
            t_len = int(rng.integers(0, k + 1))
            target = list(rng.integers(1, n_cls + 1, size=t_len))
            if ctc_required_length(target) > k:
                continue
            expected = ctc_nll_bruteforce(probs, target)
            got = ctc_loss(t(probs), target).item()
            assert got == pytest.approx(expected, abs=1e-9)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        probs = rng.dirichlet(np.ones(5), size=(3, 6))
        targets = [[1, 2], [3], [2, 2, 4]]
        lengths = torch.tensor([len(x) for x in targets])
        padded = torch.zeros(3, 3, dtype=torch.long)
        for i, tgt in enumerate(targets):
            padded[i, :len(tgt)] = torch.tensor(tgt)
        batch = ctc_loss_batch(t(probs), padded, lengths)
        for i, tgt in enumerate(targets):
            single = ctc_loss(t(probs[i]), tgt)
            assert batch[i].item() == pytest.approx(single.item(), abs=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        probs = t(rng.dirichlet(np.ones(4), size=5)).requires_grad_(True)
        target = [1, 3, 2]
        ctc_loss(probs, target).backward()
        eps = 1e-7
        for idx in [(0, 1), (2, 0), (4, 3)]:
            with torch.no_grad():
                up = probs.detach().clone()
                up[idx] += eps
                down = probs.detach().clone()
                down[idx] -= eps
                numeric = (ctc_loss(up, target) - ctc_loss(down, target)).item() / (2 * eps)
            analytic = probs.grad[idx].item()
            assert abs(analytic - numeric) < 1e-3 * max(1.0, abs(numeric))


class TestTotalLoss:
    def _parts(self, v=1.0):
        one = lambda: torch.tensor(v)
        return LossParts(confidence=one(), iou=one(), mask=one(),
                         sampling=one(), ctc=one())

    def test_all_zero(self):
        parts = self._parts(0.0)
        assert total_loss(parts, LossWeights()).item() == 0.0

    def test_default_weights_supervision_on(self):
        assert total_loss(self._parts(), LossWeights()).item() == pytest.approx(17.0)

    def test_supervision_off_drops_sampling(self):
        w = LossWeights(sampling_supervision_enabled=False)
        assert total_loss(self._parts(), w).item() == pytest.approx(16.0)

    def test_linear_in_each_part(self):
        w = LossWeights()
        base = total_loss(self._parts(), w).item()
        parts = self._parts()
        parts.mask = torch.tensor(3.0)
        assert total_loss(parts, w).item() == pytest.approx(base + 5.0 * 2.0)

    def test_nan_aborts_with_name(self):
        parts = self._parts()
        parts.iou = torch.tensor(float("nan"))
        with pytest.raises(LossNaNError) as err:
            total_loss(parts, LossWeights())
        assert err.value.part == "iou"


class TestNonNegativity:
    def test_losses_nonnegative_random(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            pred = torch.rand(5, 5)
            gt = (torch.rand(5, 5) > 0.5).float()
            assert dice_loss(pred, gt).item() >= -1e-6
            d_pred = t(rng.uniform(0.1, 30, (4, 4)))
            d_gt = t(rng.uniform(0.1, 30, (4, 4)))
            assert (iou_box_loss(d_pred, d_gt) >= -1e-9).all()
            probs = t(rng.dirichlet(np.ones(4), size=6))
            assert ctc_loss(probs, [1, 2]).item() >= -1e-9
