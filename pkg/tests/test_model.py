import json

import pytest

from grappa.featurize import featurize
from grappa.gnn import attention_scores
from grappa.model import (
    Architecture,
    forward_antoine,
    init_model,
    load_checkpoint,
    model_from_checkpoint,
    parameter_accounting_markdown,
    predict,
    predict_dataset,
    save_checkpoint,
    to_checkpoint,
)
from grappa.smiles import parse_smiles

from _oracles import synthetic_dataset


def test_final_architecture_parameter_count():
    model = init_model(Architecture(), seed=0)
    # 4 layers x 2 heads: (24 or 32)x32 + 9x32 + 32 per head.
    gat = 2 * (24 * 32 + 9 * 32 + 32) + 3 * 2 * (32 * 32 + 9 * 32 + 32)
    pool = 3 * 32 * 32
    head = (34 * 16 + 16 + 32) + 2 * (16 * 16 + 16 + 32) + (16 * 3 + 3)
    assert model.parameter_count() == gat + pool + head == 14563


def test_parameter_count_within_published_band():
    model = init_model(Architecture(), seed=0)
    assert abs(model.parameter_count() - 15319) <= 0.10 * 15319


def test_sum_pooling_drops_readout_weights():
    model = init_model(Architecture(pooling="sum"), seed=0)
    names = model.named_parameters()
    assert "pool.Wq" not in names
    assert model.parameter_count() == 14563 - 3 * 32 * 32


def test_architecture_validation():
    with pytest.raises(ValueError):
        Architecture(gat_layers=1).validate()
    with pytest.raises(ValueError):
        Architecture(heads=0).validate()
    with pytest.raises(ValueError):
        Architecture(pooling="max").validate()
    with pytest.raises(ValueError):
        Architecture(hidden_layers=0).validate()


def test_checkpoint_roundtrip_bitwise(tmp_path):
    model = init_model(Architecture(), seed=42)
    path = tmp_path / "model.json"
    save_checkpoint(model, path)
    restored = load_checkpoint(path)
    for name, tensor in model.named_parameters().items():
        assert (restored.named_parameters()[name].data == tensor.data).all(), name
    for name, buf in model.named_buffers().items():
        assert (restored.named_buffers()[name] == buf).all(), name
    a = predict(model, "CC(=O)OC", temperatures=350.0)
    b = predict(restored, "CC(=O)OC", temperatures=350.0)
    assert a.params == b.params and a.ln_p_kpa == b.ln_p_kpa


def test_checkpoint_names_follow_convention(tmp_path):
    model = init_model(Architecture(gat_layers=2, heads=3), seed=0)
    data = to_checkpoint(model)
    assert data["format_version"] == 1
    names = set(data["params"])
    assert "gat.0.0.theta_v" in names
    assert "gat.1.2.att" in names
    assert "pool.Wq" in names
    assert "head.2.bn.running_mean" in names
    assert "head.out.weight" in names
    arch = data["arch"]
    assert arch["gat_layers"] == 2 and arch["heads"] == 3
    assert arch["pooling"] == "interaction"
    assert arch["param_ranges"]["B"] == [1500.0, 6000.0]


def test_checkpoint_rejects_bad_payloads():
    model = init_model(Architecture(), seed=1)
    good = to_checkpoint(model)
    bad = json.loads(json.dumps(good))
    bad["format_version"] = 99
    with pytest.raises(ValueError):
        model_from_checkpoint(bad)
    bad = json.loads(json.dumps(good))
    del bad["params"]["pool.Wq"]
    with pytest.raises(ValueError):
        model_from_checkpoint(bad)
    bad = json.loads(json.dumps(good))
    bad["params"]["mystery"] = {"shape": [1], "values": [0.0]}
    with pytest.raises(ValueError):
        model_from_checkpoint(bad)


def test_accounting_markdown_totals():
    model = init_model(Architecture(), seed=2)
    text = parameter_accounting_markdown(model)
    assert "14563" in text
    assert "gat.0.0.theta_v" in text
    total = sum(row["count"] for row in model.accounting())
    assert total == model.parameter_count()


def test_forward_antoine_batch_matches_single():
    model = init_model(Architecture(), seed=3)
    graphs = [featurize(parse_smiles(s)) for s in ("CCO", "CCCC", "c1ccccc1")]
    a, b, c = forward_antoine(model, graphs, mode="infer")
    for k, graph in enumerate(graphs):
        a1, b1, c1 = forward_antoine(model, [graph], mode="infer")
        assert a1.item() == pytest.approx(a.data[k], abs=1e-12)
        assert b1.item() == pytest.approx(b.data[k], abs=1e-12)
        assert c1.item() == pytest.approx(c.data[k], abs=1e-12)


def test_predict_dataset_covers_split():
    ds, _ = synthetic_dataset(points_per_component=4)
    model = init_model(Architecture(gat_layers=2, heads=1, hidden_layers=1),
                       seed=4)
    points, params = predict_dataset(model, ds, split="valid")
    valid_components = {c for c, s in ds.splits.items() if s == "valid"}
    assert set(params) == valid_components
    assert len(points) == 4 * len(valid_components)
    assert all(pt.p_pred_pa > 0 for pt in points)
    assert all(pt.mol_weight > 0 for pt in points)


def test_attention_scores_work_on_model_layers():
    model = init_model(Architecture(), seed=5)
    graph = featurize(parse_smiles("CC(=O)O"))
    scores = attention_scores(graph, model.gat)
    assert scores.shape == (4,)
    assert ((scores >= 0) & (scores <= 1)).all()
