import numpy as np
import pytest

from lqts.corpus import (
    FaceSet,
    Gallery,
    ProxyTable,
    load_features,
    load_gallery,
    load_model,
    load_proxies,
    save_features,
    save_gallery,
    save_model,
    save_proxies,
)
from lqts.errors import CorpusError
from lqts.metafeat import TransitivityFeature
from lqts.svr import SvrConfig, SvrModel, predict

from conftest import tiny_gallery


def write_gallery_dir(tmp_path, rows, files):
    root = tmp_path / "gal"
    (root / "sets").mkdir(parents=True)
    (root / "manifest.tsv").write_text("".join(rows))
    for rel, text in files.items():
        (root / rel).write_text(text)
    return root


class TestFaceSet:
    def test_rejects_nan(self):
        with pytest.raises(CorpusError, match="row 1"):
            FaceSet("x", np.array([[1.0, 2.0], [np.nan, 1.0]]))

    def test_rejects_zero_norm(self):
        with pytest.raises(CorpusError, match="zero-norm"):
            FaceSet("x", np.array([[1.0, 2.0], [0.0, 0.0]]))

    def test_exemplars_read_only(self):
        s = FaceSet("x", np.array([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            s.exemplars[0, 0] = 5.0


class TestGalleryLoad:
    def test_load_three_sets(self, tmp_path):
        rows = [f"s{i}\t-\tsets/s{i}.csv\n" for i in range(3)]
        files = {f"sets/s{i}.csv": "1.0,0.5\n0.25,2.0\n" for i in range(3)}
        g = load_gallery(write_gallery_dir(tmp_path, rows, files))
        assert len(g) == 3 and g.dim == 2
        assert g.set_ids == ["s0", "s1", "s2"]
        assert not g.labelled

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorpusError, match="manifest"):
            load_gallery(tmp_path)

    def test_nan_names_set_and_row(self, tmp_path):
        rows = ["bad\t-\tsets/bad.csv\n"]
        files = {"sets/bad.csv": "1.0,2.0\nnan,1.0\n"}
        with pytest.raises(CorpusError, match=r"'bad'.*row 1"):
            load_gallery(write_gallery_dir(tmp_path, rows, files))

    def test_dimension_mismatch(self, tmp_path):
        rows = ["a\t-\tsets/a.csv\n", "b\t-\tsets/b.csv\n"]
        files = {"sets/a.csv": "1.0,2.0\n", "sets/b.csv": "1.0,2.0,3.0\n"}
        with pytest.raises(CorpusError, match="dimension"):
            load_gallery(write_gallery_dir(tmp_path, rows, files))

    def test_mixed_labelling_rejected(self, tmp_path):
        rows = ["a\tp1\tsets/a.csv\n", "b\t-\tsets/b.csv\n"]
        files = {"sets/a.csv": "1.0\n", "sets/b.csv": "2.0\n"}
        with pytest.raises(CorpusError, match="mixed"):
            load_gallery(write_gallery_dir(tmp_path, rows, files))

    def test_labels_gated_behind_eval_accessor(self, rng):
        g = tiny_gallery(rng, n_sets=2)
        with pytest.raises(CorpusError, match="unlabelled"):
            g.evaluation_labels()
        labelled = Gallery(sets=g.sets, labels={s.set_id: "p" for s in g})
        assert labelled.evaluation_labels() == {"set0": "p", "set1": "p"}


class TestGalleryRoundTrip:
    @pytest.mark.parametrize("binary", [False, True])
    def test_save_load_identity(self, rng, tmp_path, binary):
        labels = {f"set{i}": f"person{i % 2}" for i in range(4)}
        g = tiny_gallery(rng, n_sets=4, labels=labels)
        if binary:
            # binary payload is float32; quantize first so equality is exact
            g = Gallery(
                sets=tuple(
                    FaceSet(s.set_id, s.exemplars.astype(np.float32).astype(np.float64))
                    for s in g
                ),
                labels=labels,
            )
        save_gallery(g, tmp_path / "out", binary=binary)
        again = load_gallery(tmp_path / "out")
        assert again == g
        assert again.set_ids == g.set_ids

    def test_save_is_deterministic(self, rng, tmp_path):
        g = tiny_gallery(rng, n_sets=3)
        save_gallery(g, tmp_path / "a")
        save_gallery(g, tmp_path / "b")
        for rel in ["manifest.tsv"] + [f"sets/set{i}.csv" for i in range(3)]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


class TestProxyTable:
    def test_no_self_proxy(self):
        with pytest.raises(CorpusError, match="itself"):
            ProxyTable(k_p=1, entries={"a": (("a", 1.0),)})

    def test_unsorted_rejected(self):
        with pytest.raises(CorpusError, match="sorted"):
            ProxyTable(k_p=2, entries={"a": (("b", 0.1), ("c", 0.9))})

    def test_round_trip(self, tmp_path):
        t = ProxyTable(
            k_p=2,
            entries={"a": (("b", 0.9), ("c", 0.5)), "b": (("a", 0.9), ("c", 0.25))},
        )
        save_proxies(t, tmp_path / "p.tsv")
        assert load_proxies(tmp_path / "p.tsv") == t

    def test_round_trip_k0(self, tmp_path):
        t = ProxyTable(k_p=0, entries={})
        save_proxies(t, tmp_path / "p.tsv")
        assert load_proxies(tmp_path / "p.tsv") == t


class TestFeatureFile:
    def test_round_trip(self, tmp_path, rng):
        feats = [
            TransitivityFeature(
                s=rng.random(5), label=float(i % 2), provenance=(f"r{i}", f"p{i}")
            )
            for i in range(10)
        ]
        save_features(feats, tmp_path / "f.tsv")
        again = load_features(tmp_path / "f.tsv")
        assert len(again) == 10
        for a, b in zip(feats, again):
            assert np.array_equal(a.s, b.s)
            assert a.label == b.label and a.provenance == b.provenance


class TestModelFile:
    def _model(self, rng, n_sv=6):
        beta = rng.normal(size=n_sv)
        beta -= beta.mean()
        return SvrModel(
            support_vectors=rng.random((n_sv, 5)),
            coefficients=beta,
            bias=0.42,
            config=SvrConfig(),
        )

    def test_round_trip_identical_predictions(self, rng, tmp_path):
        m = self._model(rng)
        save_model(m, tmp_path / "m.qts")
        again = load_model(tmp_path / "m.qts")
        assert again == m
        x = rng.random((100, 5))
        np.testing.assert_array_equal(predict(m, x), predict(again, x))

    def test_coefficient_sum_violation_rejected(self, tmp_path):
        (tmp_path / "bad.qts").write_text(
            "gamma=0.2\nepsilon=0.4\ncost=1000.0\nbias=0.1\n"
            "0.5, 0.1, 0.1, 0.1, 0.1, 0.1\n"
        )
        with pytest.raises(CorpusError, match="sum to zero"):
            load_model(tmp_path / "bad.qts")

    def test_empty_support_set_is_constant_predictor(self, tmp_path):
        (tmp_path / "c.qts").write_text("gamma=0.2\nepsilon=0.4\ncost=1000.0\nbias=0.7\n")
        m = load_model(tmp_path / "c.qts")
        assert m.n_support == 0
        assert predict(m, np.zeros(5)) == 0.7
        assert predict(m, np.full(5, 9.0)) == 0.7
