import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_arch():
    from fast_transfer.embed import AeArchitecture

    # 64x64 input, small channel counts: fast but shape-compatible with the env
    return AeArchitecture(resolution=64, channels=(4, 8, 8), latent_dim=16)


@pytest.fixture
def tiny_ae(tiny_arch):
    import torch

    from fast_transfer.embed import FrameAutoencoder

    torch.manual_seed(0)
    return FrameAutoencoder(tiny_arch).eval()


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line, then asserts ``ok``."""

    def record(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((n, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
