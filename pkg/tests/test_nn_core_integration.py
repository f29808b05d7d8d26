import torch
from nn_core.common import PROJECT_ROOT

import dwgf


def test_project_root() -> None:
    assert PROJECT_ROOT
    assert (PROJECT_ROOT / "conf").exists()
    for experiment in ("inpainting", "inpainting_euler", "superres", "identity", "fixed_point"):
        assert (PROJECT_ROOT / "conf" / f"{experiment}.yaml").exists()


def test_package_defaults_to_double_precision() -> None:
    assert dwgf.__version__
    assert torch.get_default_dtype() == torch.float64
    assert torch.zeros(1).dtype == torch.float64
