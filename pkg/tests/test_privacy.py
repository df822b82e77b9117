import logging
import unittest
from unittest import mock

import numpy as np

from psmm import sharing
from psmm.bilinear import DenseOperator, SchemeOperator, strassen_scheme
from psmm.exceptions import BudgetError, ConfigError, PrivacyViolation, UsageError
from psmm.field import FieldSpec
from psmm.linalg import FieldMatrix, matmul_naive
from psmm.privacy import (
    AuditParams,
    assert_secret_independence,
    beaver_opening_bijection,
    coalition_view,
    coalition_view_map,
    controller_leakage_check,
    enumerate_view_distribution,
    masking_bijection_check,
    postprocessing_invariance,
)
from psmm.protocol import ProtocolConfig, deal_shares, encode_secrets
from psmm.rng import RngStream
from psmm.sharing import SharingParams

F5 = FieldSpec(5)
A = FieldMatrix.from_rows([[1, 2], [3, 4]], F5)
B = FieldMatrix.from_rows([[0, 1], [4, 2]], F5)
J = FieldMatrix(np.ones((2, 2), dtype=np.int64), F5)


class ViewDistributionTest(unittest.TestCase):
    params = AuditParams.of(2, 2, 2)

    def test_single_agent_view_is_uniform(self):
        for agent in (0, 1):
            dist = enumerate_view_distribution(self.params, F5, A, B, [agent], [1, 2])
            self.assertEqual(dist.total, 625)
            self.assertEqual(len(dist.histogram), 625)
            self.assertTrue(dist.is_uniform)
            self.assertFalse(dist.vacuous)

    def test_single_agent_view_is_secret_independent(self):
        verdict = assert_secret_independence(self.params, F5, (A, B), (A + J, B + J), [0], [1, 2])
        self.assertTrue(verdict.passed)
        self.assertIsNone(verdict.differing_view)

    def test_two_agents_recover_a_block(self):
        dist = enumerate_view_distribution(self.params, F5, A, B, [0, 1], [1, 2])
        self.assertFalse(dist.is_uniform)
        verdict = assert_secret_independence(self.params, F5, (A, B), (A + J, B + J), [0, 1], [1, 2])
        self.assertFalse(verdict.passed)
        self.assertIsNotNone(verdict.differing_view)
        self.assertNotEqual(verdict.counts[0], verdict.counts[1])

    def test_larger_threshold_hides_pairs(self):
        params = AuditParams.of(2, 2, 3)
        F3 = FieldSpec(3)
        A3 = FieldMatrix.from_rows([[1, 0], [2, 1]], F3)
        J3 = FieldMatrix(np.ones((2, 2), dtype=np.int64), F3)
        dist = enumerate_view_distribution(params, F3, A3, A3, [0, 1], [1, 2])
        self.assertTrue(dist.is_uniform)
        verdict = assert_secret_independence(params, F3, (A3, A3), (A3 + J3, A3), [0, 1], [1, 2])
        self.assertTrue(verdict.passed)

    def test_no_masks_is_vacuous(self):
        params = AuditParams.of(2, 2, 1)
        with self.assertLogs("psmm.privacy", level=logging.WARNING):
            dist = enumerate_view_distribution(params, F5, A, B, [0], [1])
        self.assertTrue(dist.vacuous)
        self.assertEqual(dist.total, 1)

    def test_budget(self):
        with self.assertRaises(BudgetError) as ctx:
            enumerate_view_distribution(self.params, F5, A, B, [0], [1, 2], budget=100)
        self.assertEqual(ctx.exception.required, 625)
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_bad_points_and_coalitions(self):
        with self.assertRaises(UsageError):
            enumerate_view_distribution(self.params, F5, A, B, [0], [1, 6])
        with self.assertRaises(UsageError):
            enumerate_view_distribution(self.params, F5, A, B, [0], [0, 2])
        with self.assertRaises(UsageError):
            enumerate_view_distribution(self.params, F5, A, B, [3], [1, 2])

    def test_audit_params(self):
        self.assertEqual(AuditParams.of(4, 4, 2).k, 4)
        with self.assertRaises(ConfigError):
            AuditParams.of(2, 3, 2)

    def test_view_map_matches_dealt_shares(self):
        P = FieldSpec(101)
        params = SharingParams.of(4, 2, 2)
        secret_a = FieldMatrix.from_rows([[i + 4 * j for i in range(4)] for j in range(4)], P)
        secret_b = FieldMatrix.from_rows([[3 * i + j for i in range(4)] for j in range(4)], P)
        config = ProtocolConfig(params, 8, P)
        shares, context = deal_shares(config, secret_a, secret_b, RngStream(7, "view"))
        g_a, g_b = encode_secrets(params, secret_a, secret_b, RngStream(7, "view"))
        masks = []
        for poly in (g_a, g_b):
            for ell in range(params.n_masks):
                masks.extend(poly.coeffs[4 + ell].entries())

        view_map = coalition_view_map(params, P, secret_a, secret_b, [1, 3], context.points)
        self.assertEqual(view_map.mask_scalars, 16)
        self.assertEqual(view_map.image(masks), coalition_view(shares, [1, 3]).key())

    def test_encoder_without_masks_is_caught(self):
        encode = sharing._encode

        def unmasked(blocks, masks, structured, mask_base):
            return encode(blocks, [], structured, mask_base)

        with mock.patch("psmm.sharing._encode", side_effect=unmasked):
            dist = enumerate_view_distribution(self.params, F5, A, B, [0], [1, 2])
            verdict = assert_secret_independence(self.params, F5, (A, B), (A + J, B), [0], [1, 2])
        self.assertFalse(dist.is_uniform)
        self.assertFalse(verdict.passed)


class BijectionTest(unittest.TestCase):
    def test_distinct_points(self):
        result = masking_bijection_check(5, 3)
        self.assertTrue(result.passed)
        self.assertEqual((result.domain, result.images), (25, 25))

    def test_repeated_points_fail(self):
        result = masking_bijection_check(5, 3, points=[2, 2])
        self.assertFalse(result.passed)
        self.assertEqual(result.images, 5)

    def test_block_shape(self):
        self.assertTrue(masking_bijection_check(3, 2, shape=(2, 1)).passed)

    def test_no_masks(self):
        self.assertTrue(masking_bijection_check(5, 1).passed)

    def test_point_count(self):
        with self.assertRaises(UsageError):
            masking_bijection_check(5, 3, points=[1])

    def test_beaver_openings(self):
        result = beaver_opening_bijection(3)
        self.assertTrue(result.passed)
        self.assertEqual((result.domain, result.images), (81, 81))
        with self.assertRaises(BudgetError):
            beaver_opening_bijection(3, (2, 2, 2), budget=1000)


class _RandomizedOperator(DenseOperator):
    name = "randomized"

    def multiply(self, A, B, counter=None):
        RngStream(0, "noise").raw(1)
        return matmul_naive(A, B, counter)


class _StatefulOperator(DenseOperator):
    name = "stateful"

    def __init__(self):
        self.calls = 0

    def multiply(self, A, B, counter=None):
        self.calls += 1
        return matmul_naive(A, B, counter).scale(self.calls)


class OperatorAuditTest(unittest.TestCase):
    def test_dense_and_strassen(self):
        for op in (DenseOperator(), SchemeOperator(strassen_scheme(), depth=2)):
            report = postprocessing_invariance(op)
            self.assertEqual(report.words_drawn, 0)
            self.assertTrue(report.deterministic)
            self.assertTrue(report.matches_dense)

    def test_randomness_is_rejected(self):
        with self.assertRaises(PrivacyViolation):
            postprocessing_invariance(_RandomizedOperator())

    def test_state_is_rejected(self):
        with self.assertRaises(PrivacyViolation):
            postprocessing_invariance(_StatefulOperator())


class ControllerTest(unittest.TestCase):
    def test_targets_pure_and_rest_masked(self):
        for k in range(1, 5):
            for t in range(1, 5):
                report = controller_leakage_check(k, t)
                self.assertTrue(report.passed, (k, t))
                self.assertEqual(report.impure_targets, ())

    def test_coalition_view_from_shares(self):
        P = FieldSpec(101)
        secret = FieldMatrix.from_rows([[i + 4 * j for i in range(4)] for j in range(4)], P)
        config = ProtocolConfig(SharingParams.of(4, 2, 2), 8, P)
        shares, _ = deal_shares(config, secret, secret)
        view = coalition_view(shares, [3, 1])
        self.assertEqual(view.coalition, (1, 3))
        key = view.key()
        self.assertEqual(key[0], 2)
        self.assertEqual(len(key), 2 * (1 + 2 * 8))


if __name__ == "__main__":
    unittest.main()
