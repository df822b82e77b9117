import logging
import unittest

from psmm.exceptions import ConfigError, EncodingError, UsageError
from psmm.field import FieldSpec
from psmm.linalg import FieldMatrix, MultCounter, matmul_naive, random_matrix, transpose
from psmm.rng import RngStream
from psmm.sharing import (
    SharingParams,
    beaver_multiply,
    bgw_threshold,
    deal_beaver_triple,
    encode_a,
    encode_b,
    evaluate,
    open_shares,
    share_additively,
    struct_threshold,
    symbolic_product,
    symbolic_product_support,
    threshold_closed_form,
    threshold_regime,
)

P = FieldSpec(2147483647)
F101 = FieldSpec(101)


class SharingParamsTest(unittest.TestCase):
    def test_valid(self):
        params = SharingParams.of(16, 4, 2)
        self.assertEqual(params.block_cols, 4)
        self.assertEqual(params.n_masks, 1)

    def test_invalid(self):
        for m, k, t in ((4, 3, 2), (4, 4, 2), (4, 2, 0), (4, 0, 2)):
            with self.assertRaises(ConfigError):
                SharingParams.of(m, k, t)


class EncoderTest(unittest.TestCase):
    def _blocks(self, count, label):
        return [random_matrix(4, 2, RngStream(1, label, i), P) for i in range(count)]

    def test_exponents(self):
        blocks = self._blocks(2, "a")
        masks = self._blocks(1, "r")
        self.assertEqual(encode_a(blocks, masks).exponents(), [0, 1, 4])
        self.assertEqual(encode_b(blocks, masks).exponents(), [0, 2, 4])
        self.assertEqual(encode_a(self._blocks(4, "a"), []).exponents(), [0, 1, 2, 3])

    def test_evaluate_matches_powers(self):
        blocks = self._blocks(2, "a")
        masks = self._blocks(1, "r")
        g = encode_a(blocks, masks)
        self.assertEqual(evaluate(g, 1), blocks[0] + blocks[1] + masks[0])
        self.assertEqual(evaluate(g, 2), blocks[0] + blocks[1].scale(2) + masks[0].scale(16))

    def test_evaluate_counts_term_scalings(self):
        g = encode_b(self._blocks(2, "b"), self._blocks(1, "r"))
        counter = MultCounter()
        evaluate(g, 3, counter)
        self.assertEqual(counter.scalar_mults, 3 * 4 * 2)

    def test_mask_shape_mismatch(self):
        with self.assertRaises(EncodingError):
            encode_a(self._blocks(2, "a"), [FieldMatrix.zeros(2, 2, P)])
        with self.assertRaises(EncodingError):
            encode_b([], [])

    def test_product_aligns_targets(self):
        k, t = 2, 2
        A_blocks = self._blocks(k, "a")
        B_blocks = self._blocks(k, "b")
        g_a = encode_a(A_blocks, self._blocks(t - 1, "ra"))
        g_b = encode_b(B_blocks, self._blocks(t - 1, "rb"))
        product = {}
        for ea, ca in g_a.coeffs.items():
            for eb, cb in g_b.coeffs.items():
                term = matmul_naive(transpose(ca), cb)
                product[ea + eb] = product[ea + eb] + term if ea + eb in product else term
        for i in range(k):
            for j in range(k):
                self.assertEqual(product[i + k * j], matmul_naive(transpose(A_blocks[i]), B_blocks[j]))


class SupportTest(unittest.TestCase):
    def test_small_cases(self):
        s = symbolic_product_support(2, 2)
        self.assertEqual(s.K1, (0, 1, 2, 3))
        self.assertEqual(s.K2, (4, 5))
        self.assertEqual(s.K3, (4, 6))
        self.assertEqual(s.K4, (8,))
        self.assertEqual(s.size, 8)
        self.assertEqual(s.masked, (4, 5, 6, 8))
        self.assertEqual(symbolic_product_support(8, 4).size, 98)
        self.assertEqual(symbolic_product_support(4, 2).size, 24)

    def test_no_masks(self):
        s = symbolic_product_support(3, 1)
        self.assertEqual(s.union, tuple(range(9)))
        self.assertEqual(s.K2 + s.K3 + s.K4, ())

    def test_symbolic_product_matches_closed_form(self):
        for k in range(1, 5):
            for t in range(1, 5):
                product = symbolic_product(k, t)
                support = symbolic_product_support(k, t)
                self.assertEqual(tuple(sorted(product)), support.union)
                self.assertLessEqual(support.size, threshold_closed_form(k, t))

    def test_target_coefficients_are_pure(self):
        k, t = 3, 3
        product = symbolic_product(k, t)
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                terms = product[(i - 1) + k * (j - 1)]
                self.assertEqual(dict(terms), {(("A", i), ("B", j)): 1})

    def test_invalid_arguments(self):
        with self.assertRaises(UsageError):
            symbolic_product_support(0, 2)
        with self.assertRaises(UsageError):
            threshold_closed_form(2, 0)


class ThresholdTest(unittest.TestCase):
    def test_closed_form_values(self):
        self.assertEqual(threshold_closed_form(2, 2), 8)
        self.assertEqual(threshold_closed_form(8, 4), 98)
        self.assertEqual(threshold_closed_form(8, 8), 134)
        self.assertEqual(threshold_closed_form(2, 1), 5)

    def test_bgw(self):
        self.assertEqual(bgw_threshold(8, 4), 448)
        self.assertEqual(bgw_threshold(2, 2), 12)

    def test_regime(self):
        self.assertEqual(threshold_regime(8, 4), "k2+kt+t-2")
        self.assertEqual(threshold_regime(2, 8), "2k2+2t-3")
        self.assertEqual(threshold_regime(2, 3), "tie")

    def test_struct_threshold(self):
        self.assertEqual(struct_threshold(2, 2, 1), 3)
        with self.assertRaises(UsageError):
            struct_threshold(2, 2, 5)
        with self.assertRaises(UsageError):
            struct_threshold(2, 2, 0)

    def test_struct_threshold_warns_on_full_dimension(self):
        # k=3, t=2: structured value 19 differs from the full threshold 15
        with self.assertLogs("psmm.sharing", level=logging.WARNING):
            self.assertEqual(struct_threshold(3, 2, 9), 19)


class BeaverTest(unittest.TestCase):
    def test_additive_roundtrip(self):
        secret = random_matrix(3, 3, RngStream(5, "secret"), F101)
        shares = share_additively(secret, 3, RngStream(5, "shares"))
        self.assertEqual(shares.n_parties, 3)
        self.assertEqual(open_shares(shares), secret)

    def test_multiply_matches_oracle(self):
        for trial in range(20):
            a, b, c = 1 + trial % 4, 1 + (trial // 4) % 4, 2
            rng = RngStream(6, "beaver", trial)
            A = random_matrix(a, b, rng.derive("A"), F101)
            B = random_matrix(b, c, rng.derive("B"), F101)
            triple = deal_beaver_triple(a, b, c, 3, rng.derive("triple"), F101)
            result = beaver_multiply(
                share_additively(A, 3, rng.derive("sa")),
                share_additively(B, 3, rng.derive("sb")),
                triple,
            )
            self.assertEqual(open_shares(result), matmul_naive(A, B))

    def test_shape_mismatch(self):
        rng = RngStream(7, "bad")
        triple = deal_beaver_triple(2, 2, 2, 2, rng, F101)
        with self.assertRaises(UsageError):
            beaver_multiply(
                share_additively(FieldMatrix.zeros(2, 3, F101), 2, rng),
                share_additively(FieldMatrix.zeros(2, 2, F101), 2, rng),
                triple,
            )


if __name__ == "__main__":
    unittest.main()
