import numpy as np
import pytest

from slbm import (
    D3Q19,
    Geometry,
    SparseLattice,
    build_adjacency,
    build_block_vector,
    make_channel,
    order_lexicographic,
)


def lattice_for(geometry, ordering=None, padding=0):
    if ordering is None:
        ordering = order_lexicographic(geometry)
    adjacency = build_adjacency(geometry, ordering, D3Q19, padding=padding)
    return SparseLattice(
        geometry=geometry,
        model=D3Q19,
        ordering=ordering,
        adjacency=adjacency,
        block=build_block_vector(adjacency),
    )


@pytest.fixture(scope="session")
def small_channel():
    return make_channel(16, 10, 10)


@pytest.fixture(scope="session")
def small_channel_lattice(small_channel):
    return lattice_for(small_channel)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def periodic_geometry(flags):
    return Geometry(flags=np.asarray(flags, dtype=np.uint8),
                    name="random", periodic=(True, True, True))
