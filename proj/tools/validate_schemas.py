#!/usr/bin/env python3
"""Validate run logs and training logs against the JSON schemas in schemas/.

With --cli the script first produces fresh artifacts: it runs the bundled
plans with few trials and every builtin task through hpoloop-task, then
validates everything it wrote. With --run-log-dir / --training-log-dir it
validates existing files. Exits non-zero on the first invalid document.
"""
import argparse
import copy
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource


def load_schemas(schema_dir):
    schemas = {}
    for name in ("training_log", "run_log"):
        path = schema_dir / f"{name}.schema.json"
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        schemas[name] = schema
    registry = Registry().with_resources(
        [(s["$id"], Resource.from_contents(s)) for s in schemas.values()]
        + [(f"{name}.schema.json", Resource.from_contents(s)) for name, s in schemas.items()])
    return {name: jsonschema.Draft202012Validator(s, registry=registry) for name, s in schemas.items()}


def errors_of(validator, doc):
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
            for e in validator.iter_errors(doc)]


def check_file(validator, path, failures):
    problems = errors_of(validator, json.loads(path.read_text()))
    for p in problems:
        failures.append(f"{path}: {p}")
    return not problems


def check_tree(validator, root, pattern, failures):
    files = sorted(pathlib.Path(root).rglob(pattern))
    for f in files:
        check_file(validator, f, failures)
    return len(files)


def run(cmd):
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        sys.exit(f"command failed ({result.returncode}): {' '.join(map(str, cmd))}\n{result.stdout}{result.stderr}")


def produce(args, work):
    # builtin tasks through the standalone task runner
    tasks = {
        "convex2d": ({"kind": "convex2d"}, None, {"x": 1.5, "y": -2}),
        "synthetic": ({"kind": "synthetic_trainer", "epochs": 12, "noise": 0.01,
                       "terms": [{"hp": "learning_rate", "target": 0.6}]},
                      args.plans / "spaces" / "synthetic_cnn.json",
                      {"learning_rate": 0.001, "weight_decay": 0.0001, "batch_size": 64, "optimizer": "adam"}),
        "toy": ({"kind": "toy_classifier"}, args.plans / "spaces" / "toy_classifier.json",
                {"learning_rate": 0.05, "l2_weight": 0.0001, "epochs": 20, "batch_size": 32}),
    }
    train_dir = work / "training_logs"
    train_dir.mkdir(parents=True)
    for name, (task, space, config) in tasks.items():
        (work / f"{name}.task.json").write_text(json.dumps(task))
        (work / f"{name}.config.json").write_text(json.dumps(config))
        cmd = [args.task_cli, "--task", work / f"{name}.task.json", "--config", work / f"{name}.config.json",
               "--log", train_dir / f"{name}.json", "--seed", "3"]
        if space:
            cmd += ["--space", space]
        run(cmd)
    # plans with a local backend
    runs_dir = work / "runs"
    for plan, extra in (("convex_random.plan.json", ["--runs", "2", "--trials", "5"]),
                        ("convex_tpe.plan.json", ["--runs", "2", "--trials", "8"]),
                        ("convex.plan.json", ["--trials", "4"]),
                        ("toy_agent.plan.json", ["--runs", "1", "--trials", "3"])):
        run([args.cli, "run", args.plans / plan, "--out", runs_dir / plan.split(".")[0], *extra])
    return train_dir, runs_dir


def negative_checks(validators, failures):
    # documents the schemas must reject
    good_train = {"epochs": [0, 1], "metrics": {"val_acc": [0.5, 0.6]}, "final_metric": 0.6, "total_time_s": 0}
    bad_train = [dict(good_train, epochs=[]), {k: v for k, v in good_train.items() if k != "metrics"},
                 dict(good_train, metrics={"val_acc": ["high"]}), dict(good_train, extra=1),
                 {k: v for k, v in good_train.items() if k != "total_time_s"}, dict(good_train, total_time_s=-1)]
    for doc in bad_train:
        if not errors_of(validators["training_log"], doc):
            failures.append(f"training_log schema accepted an invalid document: {doc}")
    if errors_of(validators["training_log"], good_train):
        failures.append("training_log schema rejected a valid document")
    return len(bad_train)


def mutate_run_log(validators, path, failures):
    doc = json.loads(path.read_text())
    if not doc["entries"]:
        return 0
    cases = []
    a = copy.deepcopy(doc)
    a["entries"][0]["result"]["final_score"] = None
    a["entries"][0]["result"]["status"] = "succeeded"
    cases.append(a)
    b = copy.deepcopy(doc)
    b["format_version"] = 2
    cases.append(b)
    c = copy.deepcopy(doc)
    c["entries"][0]["config"]["x"] = [1, 2]
    cases.append(c)
    d = copy.deepcopy(doc)
    del d["metadata"]["seed"]
    cases.append(d)
    for case in cases:
        if not errors_of(validators["run_log"], case):
            failures.append(f"run_log schema accepted a mutated copy of {path}")
    return len(cases)


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--schemas", type=pathlib.Path, required=True)
    parser.add_argument("--cli", type=pathlib.Path)
    parser.add_argument("--task-cli", type=pathlib.Path)
    parser.add_argument("--plans", type=pathlib.Path)
    parser.add_argument("--work", type=pathlib.Path)
    parser.add_argument("--run-log-dir", type=pathlib.Path, action="append", default=[])
    parser.add_argument("--training-log-dir", type=pathlib.Path, action="append", default=[])
    args = parser.parse_args()

    validators = load_schemas(args.schemas)
    failures = []
    counts = {"run_log": 0, "training_log": 0, "rejected": negative_checks(validators, failures)}

    run_dirs, train_dirs = [], []
    if args.cli:
        if not (args.task_cli and args.plans and args.work):
            parser.error("--cli needs --task-cli, --plans and --work")
        shutil.rmtree(args.work, ignore_errors=True)
        train_dir, runs_dir = produce(args, args.work)
        train_dirs += [train_dir, runs_dir]
        run_dirs.append(runs_dir)
    run_dirs += args.run_log_dir
    train_dirs += args.training_log_dir

    for d in run_dirs:
        counts["run_log"] += check_tree(validators["run_log"], d, "run_log.json", failures)
        for f in sorted(pathlib.Path(d).rglob("run_log.json"))[:3]:
            counts["rejected"] += mutate_run_log(validators, f, failures)
    for d in train_dirs:
        pattern = "train_log.json" if d in run_dirs else "*.json"
        counts["training_log"] += check_tree(validators["training_log"], d, pattern, failures)
    for d in args.run_log_dir:
        counts["run_log"] += check_tree(validators["run_log"], d, "log_*.json", failures)

    for f in failures:
        print("INVALID", f)
    print(f"validated {counts['run_log']} run logs and {counts['training_log']} training logs; "
          f"{counts['rejected']} invalid documents rejected")
    if failures or counts["run_log"] == 0 or counts["training_log"] == 0:
        sys.exit(1)


if __name__ == "__main__":
    main()
