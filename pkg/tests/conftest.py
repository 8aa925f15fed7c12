from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from rtbatch.core import Category, Request, Shape
from rtbatch.profile import SynthRow, synth_profile

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

S224 = Shape(3, 224, 224)
RN50 = Category("rn50", S224)
VGG = Category("vgg16", S224)


def affine(*models, base=2_000, per=1_000, max_batch=8, shape=S224):
    rows = [SynthRow(m, shape, base, per, max_batch) for m in (models or ("rn50",))]
    return synth_profile(rows)


def req(rid, period, deadline, n=1, first=0, cat=RN50, rt=True):
    return Request(rid, cat, period, deadline, n, first, rt)


@pytest.fixture
def profile():
    return affine("rn50", "vgg16")
