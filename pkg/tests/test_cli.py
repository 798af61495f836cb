import json

import numpy as np
import pytest

from userside.cli import main
from userside.core import catalog_from_groups, walk_counterexample_oracle
from userside.io import (
    read_catalog_tsv,
    read_embedding_tsv,
    write_catalog_tsv,
    write_embedding_tsv,
)
from userside.network import crawl_network, write_network_tsv
from userside.synth import gaussian_mixture, synthesize_adult, synthesize_movielens


@pytest.fixture
def pentagon_files(tmp_path):
    oracle = walk_counterexample_oracle()
    write_network_tsv(crawl_network(oracle, range(1, 6)), tmp_path / "net.tsv")
    write_catalog_tsv(catalog_from_groups([0, 0, 1, 1, 0]), tmp_path / "catalog.tsv")
    return tmp_path


class TestRecommend:
    def test_consul_on_fixture_prints_provider_list(self, pentagon_files, capsys):
        rc = main([
            "recommend", "--catalog", str(pentagon_files / "catalog.tsv"),
            "--provider", "network", "--network", str(pentagon_files / "net.tsv"),
            "--method", "consul", "--tau", "0", "--source", "3", "--k", "2",
        ])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["list"] == [2, 4]
        assert payload["accesses"] == 1

    def test_infeasible_tau_exits_3(self, pentagon_files, capsys):
        rc = main([
            "recommend", "--catalog", str(pentagon_files / "catalog.tsv"),
            "--provider", "network", "--network", str(pentagon_files / "net.tsv"),
            "--method", "consul", "--tau", "2", "--source", "3", "--k", "2",
        ])
        assert rc == 3
        assert "infeasible" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        rc = main([
            "recommend", "--catalog", str(tmp_path / "nope.tsv"),
            "--provider", "network", "--network", str(tmp_path / "nope_net.tsv"),
            "--method", "consul", "--source", "1",
        ])
        assert rc == 2


class TestPipeline:
    def test_ingest_train_crawl_round_trip(self, tmp_path, capsys):
        data = tmp_path / "ml"
        out = tmp_path / "out"
        out.mkdir()
        synthesize_movielens(data, n_users=20, n_items=50, n_ratings=500, seed=2)
        assert main(["ingest", "--dataset", str(data), "--out", str(out),
                     "--rule", "oldness"]) == 0
        catalog = read_catalog_tsv(out / "catalog.tsv")
        assert catalog.n == 50
        assert catalog.group_names == ("other", "protected")

        assert main(["train-provider", "--interactions",
                     str(out / "interactions.tsv"), "--factors", "4",
                     "--epochs", "2", "--out", str(out / "emb.tsv"),
                     "--n-items", "50"]) == 0
        X = read_embedding_tsv(out / "emb.tsv")
        assert X.shape == (50, 4)

        assert main(["crawl", "--provider", "bpr", "--embeddings",
                     str(out / "emb.tsv"), "--k", "5",
                     "--out", str(out / "net.tsv")]) == 0
        assert (out / "net.tsv").exists()

    def test_recover_and_align_meet_error_budget(self, tmp_path, capsys):
        n = 300
        k = int(np.ceil(n**0.5 * np.log(n) ** 0.5))
        X = gaussian_mixture(n, seed=1)
        write_embedding_tsv(X, tmp_path / "truth.tsv")
        from userside.providers import knn_provider

        net = crawl_network(knn_provider(X, k), range(1, n + 1))
        write_network_tsv(net, tmp_path / "net.tsv")
        assert main(["recover", "--network", str(tmp_path / "net.tsv"),
                     "--d", "2", "--out", str(tmp_path / "rec.tsv")]) == 0
        capsys.readouterr()
        assert main(["align", "--recovered", str(tmp_path / "rec.tsv"),
                     "--reference", str(tmp_path / "truth.tsv"),
                     "--out", str(tmp_path / "align.json")]) == 0
        report = json.loads((tmp_path / "align.json").read_text())
        assert report["error"] < 0.15
        assert set(report) == {"error", "scale", "rotation", "translation"}

    def test_evaluate_is_byte_identical_across_runs(self, tmp_path, capsys):
        data = tmp_path / "ml"
        synthesize_movielens(data, n_users=20, n_items=70, n_ratings=500, seed=4)
        args = ["evaluate", "--dataset", str(data), "--rule", "oldness",
                "--methods", "consul,privatewalk", "--k", "6", "--tau", "2",
                "--seed", "7", "--factors", "4", "--epochs", "2",
                "--max-sources", "6"]
        assert main(args + ["--out", str(tmp_path / "r1.tsv")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2.tsv")]) == 0
        assert (tmp_path / "r1.tsv").read_bytes() == (tmp_path / "r2.tsv").read_bytes()

    def test_adult_ingest_drops_clip_rows(self, tmp_path, capsys):
        path = tmp_path / "adult.data"
        out = tmp_path / "out"
        out.mkdir()
        synthesize_adult(path, n_rows=120, seed=0)
        assert main(["ingest", "--dataset", str(path), "--format", "adult",
                     "--out", str(out), "--k", "5"]) == 0
        catalog = read_catalog_tsv(out / "catalog.tsv")
        assert catalog.n < 120  # clip-boundary rows removed
        gains = [float(catalog.meta_of(i)["capital_gain"]) for i in catalog.items]
        assert 0 not in gains and 99999 not in gains
