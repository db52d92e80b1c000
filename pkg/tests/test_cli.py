import os

from hqspray.cli import main


def test_missing_config_exit_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.txt")
    assert main(["simulate", missing]) == 2
    assert missing in capsys.readouterr().err


def test_bad_usage_exit_2():
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--scale", "3"]) == 2


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("Scenario.endTime = 10\nnot a setting\n")
    assert main(["simulate", str(cfg)]) == 2


def test_simulate_host_count_and_repeatability(tmp_path):
    cfg = tmp_path / "day1.txt"
    cfg.write_text("Scenario.endTime = 120\nScenario.name = day1\nGroup1.groupID = p\nGroup1.nrofHosts = 50\n"
                   "Group2.groupID = c\nGroup2.nrofHosts = 60\nGroup2.speed = 2.7, 13.9\n"
                   "Group3.groupID = a\nGroup3.nrofHosts = 1\nGroup3.movementModel = StationaryMovement\n"
                   "Group4.groupID = r\nGroup4.nrofHosts = 2\nGroup4.movementModel = StationaryMovement\n")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["simulate", str(cfg), "--out", str(out1), "--seed", "7"]) == 0
    assert main(["simulate", str(cfg), "--out", str(out2), "--seed", "7"]) == 0
    names = sorted(os.listdir(out1))
    assert names == ["day1_ConnectivityDtnsim2Report.txt", "day1_DeliveredMessagesReport.txt",
                     "day1_MessageStatsReport.txt"]
    for n in names:
        assert (out1 / n).read_bytes() == (out2 / n).read_bytes()
    from hqspray.config import load_config
    assert len(load_config(cfg.read_text()).node_names()) == 113


def test_train_predict_plot_flow(tmp_path, capsys):
    corpus, model, pred = tmp_path / "corpus", tmp_path / "model", tmp_path / "pred"
    assert main(["corpus", str(corpus), "--scale", "0.1"]) == 0
    assert main(["train", str(corpus), str(model), "--n-trees", "3", "--min-deliveries", "1"]) == 0
    assert "accuracy" in capsys.readouterr().out
    conn = corpus / "day1_ConnectivityDtnsim2Report.txt"
    assert main(["predict", str(model / "model.txt"), str(conn), "--out", str(pred)]) == 0
    assert (pred / "hq_nodes.txt").read_text().startswith("Group.highQualityNodes = ")
    assert (pred / "predictions.csv").read_text().startswith("node,prediction,votes\n")
    # corrupt feature csv -> runtime error naming file and line
    (model / "features_day2.csv").write_text("node,contact_frequency,degree,duration\nx,oops,1,1.0\n")
    assert main(["train", str(model), str(tmp_path / "m2"), "--from-csv"]) == 1
    assert "features_day2.csv:2" in capsys.readouterr().err


def test_plot_empty_csv_exit_1(tmp_path, capsys):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert main(["plot", str(p)]) == 1
    assert "no rows" in capsys.readouterr().err


def test_predict_rejects_foreign_model(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("hqspray-forest 1\nfeatures a b c\ntrees 0\nend\n")
    c = tmp_path / "c.txt"
    c.write_text("")
    assert main(["predict", str(m), str(c)]) == 1
