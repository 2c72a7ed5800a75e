"""Smoke test for the sam_rs extension.

Usage: python smoke_test.py [CHECKPOINT_DIR SECTIONS_JSONL]

With a checkpoint directory (adur.ckpt, are.ckpt trained on hash:16:3
embeddings) and the matching sections file, the pipeline is exercised too.
"""

import json
import math
import pathlib
import sys

import sam_rs


def check_tagging():
    tokens = sam_rs.tokenize("We propose a model, it works.")
    assert [t[0] for t in tokens][:4] == ["We", "propose", "a", "model"], tokens
    assert tokens[0][1:] == (0, 2)

    spans = [(0, 2, "own_claim"), (3, 4, "data")]
    for scheme in ("BIO2", "BIOUL"):
        tags = sam_rs.encode_tags(6, spans, scheme)
        assert sam_rs.decode_tags(tags) == spans, (scheme, tags)
    assert sam_rs.encode_tags(3, [(0, 1, "data")], "BIOUL") == ["U-data", "O", "O"]

    try:
        sam_rs.encode_tags(3, [(0, 2, "data"), (1, 3, "data")])
    except ValueError:
        pass
    else:
        raise AssertionError("overlapping spans accepted")


def check_embeddings():
    rows = sam_rs.hash_embeddings(["Model", "model", "x"], 8, 0)
    assert len(rows) == 3 and len(rows[0]) == 8
    assert rows[0] == rows[1] and rows[0] != rows[2]
    assert abs(math.sqrt(sum(v * v for v in rows[2])) - 1.0) < 1e-5


def check_evaluate():
    section = {
        "doc_id": "D1",
        "index": 0,
        "char_start": 0,
        "char_end": 26,
        "text": "We win because data shows.",
        "adus": [
            {"id": "T1", "type": "own_claim", "start": 0, "end": 6},
            {"id": "T2", "type": "data", "start": 15, "end": 25},
        ],
        "relations": [{"head": "T2", "tail": "T1", "label": "supports"}],
    }
    gold = json.dumps(section) + "\n"
    graph = {
        "key": {"doc_id": "D1", "index": 0},
        "adus": [
            {"id": "T1", "type": "own_claim", "fragments": [section["adus"][0]]},
            {"id": "T2", "type": "data", "fragments": [section["adus"][1]]},
        ],
        "relations": section["relations"],
        "parts_of_same": [],
    }
    pred = json.dumps({"key": graph["key"], "graph": graph}) + "\n"
    report = json.loads(sam_rs.evaluate(gold, pred, "weak", "shorter"))
    assert report["relations"]["micro"]["f1"] == 1.0, report["relations"]
    assert report["adu_spans"]["macro_f1"] == 1.0

    empty = dict(graph, adus=[], relations=[])
    pred = json.dumps({"key": graph["key"], "graph": empty}) + "\n"
    report = json.loads(sam_rs.evaluate(gold, pred))
    assert report["relations"]["micro"]["f1"] == 0.0
    return section


def check_pipeline(ckpt_dir, sections_path):
    pipe = sam_rs.Pipeline(str(ckpt_dir / "adur.ckpt"), str(ckpt_dir / "are.ckpt"), "hash:16:3")
    first = pathlib.Path(sections_path).read_text().splitlines()[0]
    graph = json.loads(pipe.predict(first))
    assert graph["key"]["doc_id"] == json.loads(first)["doc_id"]
    gold_mode = json.loads(pipe.predict(first, gold_adus=True))
    assert len(gold_mode["adus"]) >= 1
    assert pipe.predict(first) == pipe.predict(first)


def main():
    check_tagging()
    check_embeddings()
    check_evaluate()
    if len(sys.argv) == 3:
        check_pipeline(pathlib.Path(sys.argv[1]), sys.argv[2])
        print("pipeline ok")
    print("smoke test passed")


if __name__ == "__main__":
    main()
