import numpy as np
import pytest

from degstirap.errors import ScenarioError
from degstirap.hamiltonian import TabulatedPulse
from degstirap.scenario import bundled_scenarios, load_scenario, parse_scenario, resolve

BASE = """
name = "t"
[linkage]
J = [1, 2, 3]
[pump]
omega = 10.0
angle = 0.3
envelope = {shape = "gaussian", center = 1.0, width = 2.0}
[stokes]
omega = 10.0
angle = 0.6
phase_plus = 0.2
envelope = {shape = "gaussian", center = -1.0, width = 2.0}
[initial]
amplitudes = [{manifold = "g", M = 1, re = 1.0}]
"""

MATRIX = """
[linkage]
P = {re = [[1.0, 0.0]], im = [[0.0, 0.5]]}
S = [[1.0], [2.0]]
[pump]
omega = 2.0
envelope = {center = 1.0, width = 2.0}
[stokes]
envelope = {shape = "tabulated", times = [-3.0, -1.0, 1.0, 3.0], values = [0.0, 1.0, 0.5, 0.0]}
[initial]
amplitudes = [{manifold = "g", index = 0, re = 1.0}]
"""


def error_line(text):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text, "x.toml")
    return exc.value


class TestParse:
    def test_base(self):
        sc = parse_scenario(BASE)
        assert sc.sizes == (3, 5, 7)
        assert sc.initial[2] == 1 and sc.initial_kind == "pure"
        assert sc.hamiltonian().window() == (-9.0, 9.0)

    def test_explicit_matrices(self):
        sc = parse_scenario(MATRIX)
        assert sc.sizes == (1, 2, 1) and sc.couplings.labels is None
        assert np.allclose(sc.couplings.P, 2.0 * np.array([[1.0, 0.5j]]))
        assert isinstance(sc.stokes_envelope, TabulatedPulse)
        assert sc.name == "scenario"

    def test_components(self):
        text = BASE.replace("angle = 0.3", "components = {sigma_minus = [0.6, 0.0], pi = 0.8}")
        sc = parse_scenario(text)
        assert sc.linkage_spec.pump.components == (0.6, 0.8, 0)

    def test_mixed(self):
        text = BASE.replace('amplitudes = [{manifold = "g", M = 1, re = 1.0}]',
                            'kind = "mixed"\npopulations = [{manifold = "g", M = -1, value = 0.5}, '
                            '{manifold = "g", M = 1, value = 0.5}]\n'
                            'coherences = [{a = {manifold = "g", M = -1}, b = {manifold = "g", M = 1}, re = 0.1}]')
        sc = parse_scenario(text)
        assert sc.initial_kind == "mixed" and sc.initial[0, 2] == 0.1 and sc.initial[2, 0] == 0.1

    def test_normalize(self):
        text = BASE.replace("re = 1.0}]", "re = 2.0}]\nnormalize = true")
        assert np.isclose(np.linalg.norm(parse_scenario(text).initial), 1.0)

    def test_settings(self):
        text = BASE + "[integration]\nwindow = [-5.0, 5.0]\nrtol = 1e-8\npoints = 11\n[analysis]\nzero_tol = 1e-9\n"
        sc = parse_scenario(text)
        assert sc.integration_window() == (-5.0, 5.0) and sc.rtol == 1e-8 and sc.points == 11
        assert sc.zero_tol == 1e-9


class TestErrors:
    def test_syntax_line(self):
        err = error_line(BASE.replace("omega = 10.0\nangle = 0.3", "omega = = 10.0\nangle = 0.3"))
        assert err.line == 6 and str(err).startswith("x.toml:6:")

    def test_missing_M(self):
        err = error_line(BASE.replace("M = 1,", "M = 4,"))
        assert err.line == 15 and "M=4" in str(err)

    def test_unnormalized(self):
        err = error_line(BASE.replace("re = 1.0}]", "re = 0.5}]"))
        assert "normalized" in str(err) and err.line == 15

    def test_unknown_key(self):
        err = error_line(BASE.replace("angle = 0.6", "angel = 0.6"))
        assert err.line == 11

    def test_unknown_top_level(self):
        assert error_line("colour = 1\n" + BASE).line == 1

    def test_unknown_key_in_section(self):
        err = error_line(BASE + "colour = 1\n")
        assert err.line == 16 and "[initial]" in str(err)

    def test_selection_rule(self):
        assert "selection rule" in str(error_line(BASE.replace("J = [1, 2, 3]", "J = [1, 3, 3]")))

    def test_polarization_norm(self):
        text = BASE.replace("angle = 0.3", "components = {sigma_minus = 1.0, pi = 1.0}")
        assert "unit" in str(error_line(text))

    def test_matrix_linkage_rejects_angles(self):
        assert error_line(MATRIX.replace("omega = 2.0", "angle = 2.0")).line == 6

    def test_bad_envelope(self):
        assert "shape" in str(error_line(BASE.replace('shape = "gaussian", center = 1.0', 'shape = "square", center = 1.0')))

    def test_missing_section(self):
        assert "initial" in str(error_line(BASE.split("[initial]")[0]))

    def test_nonpositive_width(self):
        assert "width" in str(error_line(BASE.replace("width = 2.0}", "width = -2.0}", 1)))

    def test_mixed_trace(self):
        text = BASE.replace('amplitudes = [{manifold = "g", M = 1, re = 1.0}]',
                            'kind = "mixed"\npopulations = [{manifold = "g", M = -1, value = 0.7}]')
        assert "sum to 1" in str(error_line(text))

    def test_index_reference_needs_bounds(self):
        assert "index" in str(error_line(MATRIX.replace("index = 0", "index = 3")))


class TestBundled:
    def test_all_present(self):
        assert set(bundled_scenarios()) >= {"fig1", "fig4", "fig5", "fig8", "fig9", "fig10"}

    @pytest.mark.parametrize("name", sorted(bundled_scenarios()))
    def test_loads(self, name):
        sc = load_scenario(resolve(name))
        assert sc.name == name and abs(np.trace(np.atleast_2d(sc.initial) if sc.initial.ndim == 2
                                                else np.outer(sc.initial, sc.initial.conj())) - 1) < 1e-12

    def test_resolve_unknown(self):
        with pytest.raises(ScenarioError):
            resolve("no_such_scenario")

    def test_fig4_parameters(self):
        sc = load_scenario(resolve("fig4"))
        pump = sc.linkage_spec.pump
        assert pump.peak_rabi == 52.0
        assert pump.components[2] == pytest.approx(np.exp(1.1814j) * np.cos(1.3376))
