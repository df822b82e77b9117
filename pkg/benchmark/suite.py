import time

from psmm.bilinear import DenseOperator, SchemeOperator, strassen_scheme
from psmm.cache import shared_cache
from psmm.field import FieldSpec
from psmm.linalg import random_matrix
from psmm.privacy import AuditParams, enumerate_view_distribution
from psmm.protocol import ProtocolConfig, agent_compute, deal_shares, reconstruct, run_protocol
from psmm.rng import RngStream
from psmm.sharing import SharingParams

FIELD = FieldSpec(2147483647)


def _secrets(m: int, seed: int = 0):
    rng = RngStream(seed, "bench")
    return random_matrix(m, m, rng.derive("A"), FIELD), random_matrix(m, m, rng.derive("B"), FIELD)


def bench_agent_operator(m: int = 64, k: int = 2, depth: int = 2, runs: int = 5) -> tuple[float, float]:
    """Return local product times for the dense operator vs lifted Strassen."""
    width = m // k
    rng = RngStream(1, "bench-agent")
    left = random_matrix(width, m, rng.derive("left"), FIELD)
    right = random_matrix(m, width, rng.derive("right"), FIELD)

    dense = DenseOperator()
    start = time.perf_counter()
    for _ in range(runs):
        dense.multiply(left, right)
    baseline = time.perf_counter() - start

    lifted = SchemeOperator(strassen_scheme(), depth)
    lifted.prepare(FIELD)
    start = time.perf_counter()
    for _ in range(runs):
        lifted.multiply(left, right)
    optimized = time.perf_counter() - start
    return baseline, optimized


def bench_decode_cache(m: int = 16, k: int = 4, t: int = 2, runs: int = 20) -> tuple[float, float]:
    """Return decode times with the inverted system evicted vs kept in cache."""
    params = SharingParams.of(m, k, t)
    A, B = _secrets(m)
    shares, context = deal_shares(ProtocolConfig(params, 24, FIELD), A, B)
    results = [agent_compute(share) for share in shares]
    cache = shared_cache()

    total = 0.0
    for _ in range(runs):
        cache.clear()
        start = time.perf_counter()
        reconstruct(results, context)
        total += time.perf_counter() - start
    cold = total

    reconstruct(results, context)  # warm
    start = time.perf_counter()
    for _ in range(runs):
        reconstruct(results, context)
    warm = time.perf_counter() - start
    return cold, warm


def bench_agent_workers(m: int = 32, k: int = 4, t: int = 2, runs: int = 3) -> tuple[float, float]:
    """Return protocol run times with a single worker vs the default pool."""
    params = SharingParams.of(m, k, t)
    A, B = _secrets(m)

    start = time.perf_counter()
    for _ in range(runs):
        run_protocol(ProtocolConfig(params, 24, FIELD, workers=1), A, B)
    serial = time.perf_counter() - start

    start = time.perf_counter()
    for _ in range(runs):
        run_protocol(ProtocolConfig(params, 24, FIELD), A, B)
    pooled = time.perf_counter() - start
    return serial, pooled


def bench_privacy_enumeration(p: int = 7) -> tuple[float, float]:
    """Return exhaustive view enumeration times for one vs four threads."""
    field = FieldSpec(p)
    params = AuditParams.of(2, 2, 2)
    rng = RngStream(2, "bench-audit")
    A = random_matrix(2, 2, rng.derive("A"), field)
    B = random_matrix(2, 2, rng.derive("B"), field)

    start = time.perf_counter()
    enumerate_view_distribution(params, field, A, B, [0], [1, 2], workers=1)
    single = time.perf_counter() - start

    start = time.perf_counter()
    enumerate_view_distribution(params, field, A, B, [0], [1, 2], workers=4)
    threaded = time.perf_counter() - start
    return single, threaded


if __name__ == "__main__":
    op_dense, op_lifted = bench_agent_operator()
    dec_cold, dec_warm = bench_decode_cache()
    run_serial, run_pooled = bench_agent_workers()
    enum_single, enum_threaded = bench_privacy_enumeration()

    print("Agent operator:\t", op_dense, op_lifted)
    print("Decode cache:\t", dec_cold, dec_warm)
    print("Agent workers:\t", run_serial, run_pooled)
    print("Privacy enumeration:\t", enum_single, enum_threaded)
