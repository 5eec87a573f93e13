"""Data generator and study-runner checks."""

import numpy as np
import pytest

from galqreg.exceptions import ValidationError
from galqreg.model import McmcConfig
from galqreg.simstudy import BETA_TRUE, DgpSpec, comparison_table, full_grid, generate, run_study
from _oracles import mc_se


class TestGenerate:
    def test_shapes(self):
        data = generate(DgpSpec(n=100, T=5, seed=0))
        assert data.n_obs == 500
        assert data.k == 3 and data.l == 2
        assert data.x_names == ("const", "x2", "x3")

    def test_zero_noise_identity(self):
        spec = DgpSpec(n=10, T=4, error="none", zero_alpha=True, seed=1)
        data = generate(spec)
        lay = data.layout
        assert np.max(np.abs(lay.y - lay.X @ np.array(BETA_TRUE))) < 1e-12

    def test_x3_mean(self):
        data = generate(DgpSpec(n=200, T=10, seed=2))
        x3 = data.layout.X[:, 2]
        assert abs(x3.mean() - 2.0) < 3 * mc_se(x3)

    def test_x_variances_use_variance_parameterization(self):
        data = generate(DgpSpec(n=300, T=10, seed=3))
        assert abs(np.var(data.layout.X[:, 1]) - 0.25) < 0.01
        assert abs(np.var(data.layout.X[:, 2]) - 0.25) < 0.01

    def test_z2_uniform_range(self):
        data = generate(DgpSpec(n=100, T=5, seed=4))
        z2 = data.layout.Z[:, 1]
        assert z2.min() >= 1.0 and z2.max() <= 3.0

    def test_deterministic_in_seed(self):
        a = generate(DgpSpec(n=10, T=3, seed=5))
        b = generate(DgpSpec(n=10, T=3, seed=5))
        assert np.array_equal(a.layout.y, b.layout.y)
        c = generate(DgpSpec(n=10, T=3, seed=6))
        assert not np.array_equal(a.layout.y, c.layout.y)

    def test_gal_error_law(self):
        spec = DgpSpec(n=200, T=5, error="gal", gal_p0=0.5, gal_gamma=0.4,
                       zero_alpha=True, seed=7)
        data = generate(spec)
        resid = data.layout.y - data.layout.X @ np.array(BETA_TRUE)
        frac = (resid <= 0).mean()
        assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / len(resid))

    def test_invalid_spec(self):
        with pytest.raises(ValidationError):
            DgpSpec(n=0, T=5)
        with pytest.raises(ValidationError):
            DgpSpec(n=5, T=5, error="cauchy")

    def test_full_grid_cells(self):
        grid = full_grid()
        assert len(grid) == 9
        assert sorted({(s.n, s.T) for s in grid}) == sorted(
            {(n, t) for n in (100, 250, 500) for t in (5, 10, 15)}
        )
        assert len({s.seed for s in grid}) == 9


class TestRunStudy:
    def test_table_shape_and_isolation(self):
        grid = [DgpSpec(n=12, T=3, seed=0), DgpSpec(n=10, T=4, seed=1)]
        cfg = McmcConfig(n_draws=400, burn_in=100, seed=5)
        study = run_study(grid, [0.25, 0.5], cfg, marglik_j=300)
        # 2 studies x 2 models x 2 quantiles
        assert len(study) == 8
        assert set(study["model"]) == {"freq", "req"}
        assert (study["error"] == "").all()
        table = comparison_table(study)
        assert table.shape == (4, 2)
        assert list(table.index) == ["SS1-FREQ", "SS1-REQ", "SS2-FREQ", "SS2-REQ"]

    def test_cell_failure_isolated(self, monkeypatch):
        import galqreg.simstudy as simstudy_mod

        real_run_freq = simstudy_mod.run_freq

        def failing_run_freq(data, priors, cfg, **kw):
            if data.n == 5:
                raise RuntimeError("synthetic cell failure")
            return real_run_freq(data, priors, cfg, **kw)

        monkeypatch.setattr(simstudy_mod, "run_freq", failing_run_freq)
        grid = [DgpSpec(n=5, T=3, seed=0), DgpSpec(n=12, T=3, seed=1)]
        cfg = McmcConfig(n_draws=200, burn_in=50, seed=6)
        study = run_study(grid, [0.5], cfg, marglik_j=300)
        bad = study[(study["study"] == "SS1") & (study["model"] == "freq")]
        good = study[study["study"] == "SS2"]
        assert (bad["error"] != "").all()
        assert "synthetic cell failure" in bad["error"].iloc[0]
        assert (good["error"] == "").all()
