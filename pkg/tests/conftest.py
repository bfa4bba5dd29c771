# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Fixtures for geodesic-gossip tests."""


def pytest_addoption(parser):
    """Parse additional pytest options."""
    parser.addoption(
        "--horizon", action="store", type=int, default=2000, help="rounds of experiment runs"
    )
    parser.addoption(
        "--repetitions", action="store", type=int, default=8, help="seeds averaged per curve"
    )
