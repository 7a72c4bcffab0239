import pytest

from ctqa.compression import kernels


@pytest.fixture(params=kernels.available_backends())
def kernel_backend(request):
    """Run a test once per compiled/fallback kernel backend."""
    with kernels.use(request.param) as backend:
        yield backend
