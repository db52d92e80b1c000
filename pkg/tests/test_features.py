import warnings

import pytest
from hypothesis import given, strategies as st

from hqspray.features import (
    FeatureVector, LabelRule, LabeledNode, ReportParseError, build_dataset, compute_features, dataset_csv,
    features_csv, label_high_quality, labels_csv, parse_connectivity, parse_delivered, read_dataset_csv,
    read_features_csv, read_labels_csv,
)
from hqspray.reports import ContactEvent, DeliveryRecord, write_connectivity, write_delivered

TRACE = "10.0 CONN A B up\n50.0 CONN A B down\n100.0 CONN A C up\n160.0 CONN A C down\n"


def test_parse_single_line():
    assert parse_connectivity("10.0 CONN c3 p1 up\n10.5 CONN c3 p1 down\n")[0] == ContactEvent(10.0, "c3", "p1", "up")


def test_unmatched_up():
    with pytest.raises(ReportParseError, match="unmatched contact c3-p1"):
        parse_connectivity("10.0 CONN c3 p1 up\n")


def test_down_before_up():
    with pytest.raises(ReportParseError, match="down before up"):
        parse_connectivity("10.0 CONN c3 p1 down\n")


def test_malformed_line_number():
    with pytest.raises(ReportParseError, match="line 2"):
        parse_connectivity("10.0 CONN a b up\n11.0 CON a b down\n")


def test_empty_trace():
    assert parse_connectivity("") == []
    assert compute_features([]) == []


def test_features_hand_trace():
    f = {v.node: v for v in compute_features(parse_connectivity(TRACE))}
    assert f["A"] == FeatureVector("A", 2, 2, 50.0)
    assert f["B"] == FeatureVector("B", 1, 1, 40.0)


def test_repeat_peer_counts_once():
    t = "0.0 CONN a b up\n5.0 CONN a b down\n10.0 CONN a b up\n20.0 CONN a b down\n"
    a = compute_features(parse_connectivity(t))[0]
    assert (a.contact_frequency, a.degree, a.duration) == (2, 1, 7.5)


DELIVERED = ("# time  ID  size  hopcount  deliveryTime  fromHost  toHost  remainingTtl  isResponse  path\n"
             "120.5 M7 600000 2 95.5 p4 r1 17904.5 N p4->c2->r1\n")


def test_parse_delivered_example():
    (rec,) = parse_delivered(DELIVERED)
    assert rec == DeliveryRecord(120.5, "M7", 600000, 2, 95.5, "p4", "r1", 17904.5, ("p4", "c2", "r1"))
    assert parse_delivered(DELIVERED.splitlines()[0]) == []


def test_parse_delivered_bad_hopcount():
    with pytest.raises(ReportParseError, match="hopcount"):
        parse_delivered("120.5 M7 600000 3 95.5 p4 r1 17904.5 N p4->c2->r1\n")


def test_parse_delivered_field_count():
    with pytest.raises(ReportParseError, match="line 1"):
        parse_delivered("120.5 M7 600000\n")


def deliveries(counts: dict[str, int], hop=1):
    out, k = [], 0
    for src, n in counts.items():
        for _ in range(n):
            k += 1
            path = (src,) + tuple(f"x{j}" for j in range(hop - 1)) + ("dst",)
            out.append(DeliveryRecord(float(k), f"M{k}", 1, hop, 1.0, src, "dst", 1.0, path))
    return out


def labels_of(records, rule):
    return {ln.node: ln.label for ln in label_high_quality(records, rule)}


def test_nine_is_enough_eight_is_not():
    lab = labels_of(deliveries({"a": 9, "b": 8}), LabelRule(sample_fraction=1.0))
    assert lab["a"] == 1 and lab["b"] == 0 and lab["dst"] == 0


def test_long_paths_do_not_count():
    with pytest.warns(UserWarning):
        lab = labels_of(deliveries({"a": 20}, hop=3), LabelRule(sample_fraction=1.0))
    assert lab["a"] == 0


def test_half_of_ten_candidates():
    recs = deliveries({f"n{i}": 9 for i in range(10)})
    a = labels_of(recs, LabelRule(rng_seed=4))
    assert sum(a.values()) == 5
    assert a == labels_of(recs, LabelRule(rng_seed=4))
    others = [labels_of(recs, LabelRule(rng_seed=s)) for s in range(6)]
    assert any(o != a for o in others)


def test_no_candidates_warns():
    with pytest.warns(UserWarning, match="no high-quality candidates"):
        lab = labels_of(deliveries({"a": 2}), LabelRule())
    assert set(lab.values()) == {0}


@given(st.dictionaries(st.sampled_from([f"n{i}" for i in range(12)]), st.integers(0, 20), min_size=1),
       st.integers(1, 19), st.integers(1, 19))
def test_candidate_monotonicity(counts, t1, t2):
    lo, hi = sorted((t1, t2))
    recs = deliveries(counts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        at_lo = labels_of(recs, LabelRule(min_deliveries=lo, sample_fraction=1.0))
        at_hi = labels_of(recs, LabelRule(min_deliveries=hi, sample_fraction=1.0))
    assert {n for n, v in at_hi.items() if v} <= {n for n, v in at_lo.items() if v}


def test_build_dataset_join():
    feats = [[FeatureVector("a", 1, 1, 2.0), FeatureVector("b", 3, 2, 1.0), FeatureVector("c", 2, 2, 5.0)]]
    ds = build_dataset(feats, [[LabeledNode("b", 1)]])
    assert len(ds) == 3
    assert ds.nodes == ["a", "b", "c"] and ds.y.tolist() == [0, 1, 0]


def test_build_dataset_errors():
    f = [FeatureVector("a", 1, 1, 2.0)]
    with pytest.raises(ValueError, match="feature days"):
        build_dataset([f, f], [[]])
    with pytest.raises(ValueError, match="zz"):
        build_dataset([f], [[LabeledNode("zz", 1)]])


def test_csv_round_trips():
    feats = [FeatureVector("a", 1, 1, 2.5), FeatureVector("b", 3, 2, 1 / 3)]
    assert read_features_csv(features_csv(feats)) == feats
    labs = [LabeledNode("a", 0), LabeledNode("b", 1)]
    assert read_labels_csv(labels_csv(labs)) == labs
    ds = build_dataset([feats], [labs])
    back = read_dataset_csv(dataset_csv(ds))
    assert back.X.tolist() == ds.X.tolist() and back.y.tolist() == ds.y.tolist() and back.nodes == ds.nodes


def test_corrupt_features_csv_names_file_and_line():
    text = "node,contact_frequency,degree,duration\na,1,1,2.0\nb,x,1,2.0\n"
    with pytest.raises(ReportParseError, match="features_day3.csv:3"):
        read_features_csv(text, "features_day3.csv")


def test_writer_parser_inverse():
    evs = [ContactEvent(1.0, "a", "b", "up"), ContactEvent(2.5, "a", "b", "down")]
    assert parse_connectivity(write_connectivity(evs)) == evs
    rec = DeliveryRecord(3.0, "M1", 10, 1, 1.0, "a", "b", 99.0, ("a", "b"))
    assert parse_delivered(write_delivered([rec])) == [rec]
