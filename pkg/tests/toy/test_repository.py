import json

import pytest

from src.errors import FormatError, VersionMismatchError
from src.toy.domain import PinholeCamera, ToysetHeader
from src.toy.repository import ToysetRepository
from src.toy.service import get_object, sample_dataset


@pytest.fixture
def header():
    """Header of a three-sample cube dataset."""
    return ToysetHeader(
        object_id="cube",
        diameter=get_object("cube").diameter,
        symmetry="finite-group/4",
        camera=PinholeCamera(),
        seed=3,
        n=3,
        depth_range=(0.5, 2.0),
        noise_sigma=0.01,
    )


@pytest.fixture
def repository(header):
    """Repository filled with three cube samples."""
    repository = ToysetRepository(header)
    for sample in sample_dataset(get_object("cube"), 3, header.camera, seed=header.seed):
        repository.add(sample)
    return repository


class TestToysetRepository:
    """Unit tests for ToysetRepository."""

    def test_add_and_get(self, header):
        """Samples are stored in insertion order."""
        repository = ToysetRepository(header)
        samples = sample_dataset(get_object("cube"), 2, header.camera, seed=1)

        for sample in samples:
            repository.add(sample)

        assert len(repository) == 2
        assert repository.get(1) == samples[1]
        assert repository.get_all() == samples

    def test_get_out_of_range(self, repository):
        """Returns None for a missing index."""
        assert repository.get(3) is None
        assert repository.get(-1) is None

    def test_round_trip(self, repository, tmp_path):
        """Saved datasets load back unchanged."""
        path = tmp_path / "cube.jsonl"

        repository.save(path)
        loaded = ToysetRepository.load(path)

        assert loaded.header == repository.header
        assert loaded.get_all() == repository.get_all()

    def test_file_layout(self, repository, tmp_path):
        """One header line then one line per sample."""
        path = tmp_path / "cube.jsonl"

        repository.save(path)

        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert json.loads(lines[0])["version"] == "toyset/1"

    def test_saving_twice_is_byte_identical(self, repository, tmp_path):
        """Serialisation is deterministic."""
        repository.save(tmp_path / "a.jsonl")
        repository.save(tmp_path / "b.jsonl")

        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_version_mismatch(self, repository, tmp_path):
        """An unknown dataset version is refused."""
        path = tmp_path / "cube.jsonl"
        repository.save(path)
        lines = path.read_text().splitlines()
        raw = json.loads(lines[0])
        raw["version"] = "toyset/2"
        path.write_text("\n".join([json.dumps(raw), *lines[1:]]) + "\n")

        with pytest.raises(VersionMismatchError):
            ToysetRepository.load(path)

    def test_bad_sample_reports_line(self, repository, tmp_path):
        """A malformed sample names its line number."""
        path = tmp_path / "cube.jsonl"
        repository.save(path)
        lines = path.read_text().splitlines()
        lines[2] = '{"observation": [1.0]}'
        path.write_text("\n".join(lines) + "\n")

        with pytest.raises(FormatError) as excinfo:
            ToysetRepository.load(path)

        assert excinfo.value.line == 3
        assert "line 3" in str(excinfo.value)

    def test_empty_file(self, tmp_path):
        """An empty file has no header."""
        path = tmp_path / "empty.jsonl"
        path.write_text("")

        with pytest.raises(FormatError) as excinfo:
            ToysetRepository.load(path)

        assert excinfo.value.line == 1
