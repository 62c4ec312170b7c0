import numpy as np
import pytest

from wormsim.rng import derive_seed, generator_for


def test_deterministic_and_distinct():
    a = derive_seed(42, "run", 0)
    assert a == derive_seed(42, "run", 0)
    assert a != derive_seed(42, "run", 1)
    assert a != derive_seed(43, "run", 0)
    assert a != derive_seed(42, "graph", 0)


def test_no_path_confusion():
    # joining must not conflate ("ab", "c") with ("a", "bc")
    assert derive_seed(1, "ab", "c") != derive_seed(1, "a", "bc")
    assert derive_seed(1, 12, 3) != derive_seed(1, 1, 23)


def test_known_value_pinned():
    # regression anchor: the mixing function is part of the output contract
    assert derive_seed(0) == 4066689987807800415
    assert derive_seed(2024, "cell", 10000, 0, "off", "0.1") == 8250944543604518849


def test_float_parts_use_repr():
    assert derive_seed(5, 0.1) == derive_seed(5, 0.1)
    assert derive_seed(5, 0.1) != derive_seed(5, 0.2)


def test_rejects_bool_and_separator():
    with pytest.raises(TypeError):
        derive_seed(1, True)
    with pytest.raises(ValueError):
        derive_seed(1, "a\x1fb")


def test_generator_reproducible():
    g1 = generator_for(7, "x")
    g2 = generator_for(7, "x")
    np.testing.assert_array_equal(g1.random(5), g2.random(5))
