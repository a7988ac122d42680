import numpy as np
import pytest
from scipy.integrate import quad

from sbm_shift.config import ModelParams
from sbm_shift.model import ChainCoefficients, chain_coefficients, chain_to_star, spectral_density
from sbm_shift.validation import ValidationError


class TestSpectralDensity:
    def test_values(self):
        params = ModelParams(alpha=0.1, s=1.0)
        assert spectral_density(0.5, params) == pytest.approx(2 * np.pi * 0.1 * 0.5, abs=1e-12)
        assert spectral_density(0.0, ModelParams(s=0.25)) == 0.0

    def test_cutoff_is_exclusive(self):
        params = ModelParams(alpha=0.1, s=1.0)
        assert spectral_density(1.0, params) == 0.0
        values = spectral_density(np.array([0.25, 0.999, 1.5]), params)
        assert values[0] > 0 and values[1] > 0 and values[2] == 0

    def test_negative_frequency(self):
        with pytest.raises(ValidationError, match="omega >= 0"):
            spectral_density(-0.1, ModelParams())


class TestChainCoefficients:
    def test_ohmic_first_site(self):
        chain = chain_coefficients(ModelParams(s=1.0, alpha=0.1, chain_length=5))
        assert chain.eta1 == pytest.approx(0.316228, abs=1e-6)
        assert chain.omega[0] == pytest.approx(2 / 3, abs=1e-12)
        assert chain.hop[0] == pytest.approx(0.235702, abs=1e-6)
        assert chain.num_sites == 4
        assert len(chain.hop) == 3

    def test_subohmic_first_site(self):
        chain = chain_coefficients(ModelParams(s=0.25, alpha=0.03, chain_length=3))
        assert chain.eta1 == pytest.approx(0.219089, abs=1e-6)
        assert chain.omega[0] == pytest.approx(0.555556, abs=1e-6)

    @pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 3.0])
    def test_closed_form(self, s):
        chain = chain_coefficients(ModelParams(s=s, omega_c=2.0, chain_length=12))
        for k in range(1, 12):
            expected = 1.0 * (1 + s ** 2 / ((s + 2 * k - 2) * (s + 2 * k)))
            assert chain.omega[k - 1] == pytest.approx(expected, abs=1e-12)
        for k in range(1, 11):
            expected = (
                2.0 * k * (s + k) / ((s + 2 * k) * (1 + s + 2 * k))
                * np.sqrt((s + 2 * k + 1) / (s + 2 * k - 1))
            )
            assert chain.hop[k - 1] == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
    def test_asymptotes(self, s):
        chain = chain_coefficients(ModelParams(s=s, chain_length=202))
        assert abs(chain.omega[199] - 0.5) < 1e-5
        assert abs(chain.hop[199] - 0.25) < 1e-5

    @pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 3.0])
    def test_coupling_matches_spectral_weight(self, s):
        params = ModelParams(s=s, alpha=0.07)
        weight, _ = quad(lambda w: spectral_density(w, params) / np.pi, 0, params.omega_c)
        assert chain_coefficients(params).eta1 ** 2 == pytest.approx(weight, abs=1e-8)


class TestChainToStar:
    def test_single_site(self):
        chain = ChainCoefficients(eta1=0.1, omega=np.array([0.7]), hop=np.array([]))
        star = chain_to_star(chain)
        np.testing.assert_allclose(star.frequencies, [0.7])
        np.testing.assert_allclose(star.transform, [[1.0]])

    def test_two_sites(self):
        chain = ChainCoefficients(eta1=0.1, omega=np.array([0.6, 0.6]), hop=np.array([0.2]))
        star = chain_to_star(chain)
        np.testing.assert_allclose(star.frequencies, [0.4, 0.8], atol=1e-12)
        np.testing.assert_allclose(star.transform[0], [1, -1] / np.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(star.transform[1], [1, 1] / np.sqrt(2), atol=1e-12)

    def test_ohmic_chain(self):
        chain = chain_coefficients(ModelParams(s=1.0, chain_length=30))
        star = chain_to_star(chain)
        assert np.all((star.frequencies > 0) & (star.frequencies < 1))
        assert star.frequencies.sum() == pytest.approx(chain.omega.sum(), abs=1e-10)
        o = star.transform
        np.testing.assert_allclose(o @ o.T, np.eye(29), atol=1e-12)
        np.testing.assert_allclose(
            o @ chain.single_particle_matrix() @ o.T, np.diag(star.frequencies), atol=1e-12
        )
