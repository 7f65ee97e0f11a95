"""Shared builders: toy body models, layouts and synthetic sessions."""

from __future__ import annotations

import pytest

from markerfit.core.synthetic import MotionScript, generate_synthetic_session
from markerfit.demo_generator import build_toy_layout, build_toy_model, toy_beta


@pytest.fixture(scope="session")
def toy():
    """Tube model without hands and its unit priors."""
    return build_toy_model()


@pytest.fixture(scope="session")
def toy_model(toy):
    return toy[0]


@pytest.fixture(scope="session")
def toy_stats(toy):
    return toy[1]


@pytest.fixture(scope="session")
def hand_toy():
    """Tube model with left and right hand joints."""
    return build_toy_model(hands=True)


@pytest.fixture(scope="session")
def toy_layout():
    return build_toy_layout()


@pytest.fixture(scope="session")
def subject_beta(toy_model):
    return toy_beta(toy_model, seed=0)


@pytest.fixture(scope="session")
def walk_session(toy_model, toy_stats, toy_layout, subject_beta):
    """Noiseless 20-frame walk with soft tissue."""
    script = MotionScript.walk(toy_model, num_frames=20, dyn_amplitude=0.5)
    return generate_synthetic_session(toy_model, subject_beta, script, toy_layout, noise=0.0, seed=0)
