import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """One run of the default toy pipeline shared by every test that needs trained models."""
    from pmanifold.pipelines import cmd_toy_pipeline

    import time

    out = tmp_path_factory.mktemp("toy")
    t0 = time.perf_counter()
    res = cmd_toy_pipeline({"output_dir": str(out)})
    res["elapsed"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def toy_models(toy_run):
    from pmanifold.io import read_checkpoint

    out = toy_run["output_dir"]
    return {r["model"]: read_checkpoint(os.path.join(out, f"model_{r['model']}.pmck")) for r in toy_run["models"]}


@pytest.fixture(scope="session")
def toy_test_set():
    from pmanifold.model import resample, synth_dataset
    from pmanifold.pipelines import DEFAULT_TOY_CONFIG as C

    g = C["geometry"]
    ds = synth_dataset(
        g["ambient_dim"], g["n_classes"], g["intrinsic_dim"], 10, g["noise_sigma"],
        seed=C["seeds"]["data"], half_width=g["half_width"], center_margin=g["center_margin"],
    )
    return resample(ds, C["n_test"], C["seeds"]["heldout"])
