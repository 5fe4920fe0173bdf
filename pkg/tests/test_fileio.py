import numpy as np
import numpy.testing as npt
import pytest

from asfcov.channel import Asf, GridDensity, Rect, TruncatedGaussian, draw_samples
from asfcov.estimators import EstimatorReport
from asfcov.fileio import (
    dump_asf,
    dump_cmx,
    dump_report,
    parse_asf,
    parse_cmx,
    read_batch,
    read_cmx,
    write_batch,
    write_cmx,
)
from asfcov.spikes import SpikeEstimate


class TestCmx:
    def test_roundtrip_exact(self, rng):
        A = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        A *= 10.0 ** rng.integers(-12, 12, size=(5, 3))
        B, trailing = parse_cmx(dump_cmx(A))
        assert np.array_equal(A, B)
        assert trailing == []

    def test_header(self):
        text = dump_cmx(np.eye(2))
        assert text.splitlines()[0] == "# CMX1 rows=2 cols=2"

    def test_file_roundtrip(self, tmp_path, rng):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        path = tmp_path / "m.cmx"
        write_cmx(path, A)
        assert np.array_equal(read_cmx(path), A)

    def test_rejects_missing_header(self):
        with pytest.raises(ValueError):
            parse_cmx("1.0,2.0\n")

    def test_rejects_truncated(self):
        with pytest.raises(ValueError):
            parse_cmx("# CMX1 rows=2 cols=1\n1.0,0.0\n")

    def test_rejects_bad_field_count(self):
        with pytest.raises(ValueError):
            parse_cmx("# CMX1 rows=1 cols=2\n1.0,0.0\n")


class TestBatchFiles:
    def test_roundtrip(self, tmp_path):
        batch = draw_samples(np.eye(3), 0.25, 7, seed=(11, 4))
        path = tmp_path / "batch.cmx"
        write_batch(path, batch)
        loaded = read_batch(path)
        assert np.array_equal(loaded.snapshots, batch.snapshots)
        assert loaded.noise_power == batch.noise_power
        assert loaded.seed == batch.seed

    def test_matrix_is_antennas_by_snapshots(self, tmp_path):
        batch = draw_samples(np.eye(3), 0.0, 7, seed=2)
        path = tmp_path / "batch.cmx"
        write_batch(path, batch)
        assert read_cmx(path).shape == (3, 7)

    def test_rejects_missing_metadata(self, tmp_path):
        path = tmp_path / "plain.cmx"
        write_cmx(path, np.eye(2))
        with pytest.raises(ValueError):
            read_batch(path)


class TestAsfFiles:
    def test_roundtrip_all_pieces(self):
        asf = Asf(
            spikes=[(-0.25, 0.5), (0.5, 1.5)],
            pieces=[
                Rect(-0.7, -0.4, 1.0),
                TruncatedGaussian(0.1, 0.05, 0.2, 0.75),
                GridDensity((0.0, 1.0, 2.0, 1.0, 0.0)),
            ],
        )
        again = parse_asf(dump_asf(asf))
        assert again.spikes == asf.spikes
        assert again.pieces == asf.pieces

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            parse_asf('spikes = []\npieces = []\nextra = 1\n')

    def test_rejects_unknown_piece(self):
        with pytest.raises(ValueError):
            parse_asf('spikes = [[0.0, 1.0]]\npieces = [{kind = "blob"}]\n')


class TestReports:
    def test_dump_parses_as_toml(self):
        import tomli

        report = EstimatorReport(
            u=np.array([0.5, 0.0, 1.25]),
            spikes=SpikeEstimate(order=1, locations=[0.25]),
            objective_trace=[3.0, 1.0],
            iterations=4,
            converged=True,
            wall_time=0.01,
            method="nnls",
        )
        data = tomli.loads(dump_report(report))
        assert data["method"] == "nnls"
        assert data["converged"] is True
        npt.assert_allclose(data["coefficients"], [0.5, 0.0, 1.25])
        npt.assert_allclose(data["spike_locations"], [0.25])
