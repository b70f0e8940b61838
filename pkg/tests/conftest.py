import numpy as np
import pytest

from schedtune import cluster as cl
from schedtune import workload as wl


@pytest.fixture(scope="session")
def device_catalog():
    return cl.load_device_catalog()


@pytest.fixture(scope="session")
def function_catalog():
    return wl.catalog()


@pytest.fixture()
def small_cluster():
    return cl.build_cluster(cl.ClusterSpec("hybrid_balanced", 40, "internet", seed=5))


def make_function(name="probe", cpu=1.0, mem=1024.0, accel="none", locality="any",
                  image_bytes=1e8, dataset_bytes=1e7, base_exec_s=1.0, required=False):
    return wl.FunctionSpec(
        name=name, req_cpu=cpu, req_mem=mem,
        preferred_accelerator=accel, preferred_locality=locality,
        image_name=f"{name}-image", image_bytes=image_bytes,
        dataset_bytes=dataset_bytes, base_exec_s=base_exec_s,
        accelerator_required=required,
    )


@pytest.fixture()
def probe_function():
    return make_function()


def random_weights(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, 8)
