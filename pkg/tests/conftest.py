import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from stad.models import RunConfig  # noqa: E402
from stad.nets import build_teacher_patch_net  # noqa: E402
from stad.service_factory import ServiceFactory, reset_services  # noqa: E402
from stad.utils.synthetic import write_pretraining_corpus, write_synthetic_category  # noqa: E402

PROJECT_ROOT = SRC.parent

# Hidden widths 4 and 8 for every architecture
NARROW = 1 / 32


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    """Factory for narrow patch networks that keep every spatial shape law."""
    def _build(p: int = 17, d: int = 8, channel_scale: float = NARROW, seed: int = 0):
        return build_teacher_patch_net(p, d, channel_scale, seed=seed)
    return _build


@pytest.fixture
def tiny_category(tmp_path):
    return write_synthetic_category(
        tmp_path / "category",
        seed=3,
        num_train=6,
        num_test_anomalous=3,
        num_test_good=2,
        side=40,
        defect_size=8,
    )


@pytest.fixture
def tiny_corpus(tmp_path):
    return write_pretraining_corpus(tmp_path / "corpus", seed=3, count=4, side=40)


@pytest.fixture
def tiny_config(tmp_path, tiny_category, tiny_corpus):
    """A run configuration small enough to train every stage in seconds."""
    return RunConfig(
        run_dir=str(tmp_path / "run"),
        category_root=str(tiny_category),
        corpus_root=str(tiny_corpus),
        scales=[17],
        descriptor_dim=8,
        channel_scale=NARROW,
        image_side=32,
        num_students=2,
        teacher_lambda_k=0.0,
        teacher_lambda_m=1.0,
        teacher_lambda_c=1.0,
        teacher_batch_size=4,
        teacher_iterations=3,
        student_epochs=2,
        seed=5,
        log_every=1,
    )


@pytest.fixture
def tiny_factory(tiny_config):
    reset_services()
    return ServiceFactory(tiny_config)
