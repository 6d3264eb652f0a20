"""End-to-end checks of the statknn command-line tool.

Every JSON the tool prints is validated against the schema files in schemas/.
Usage: test_cli.py --bin path/to/statknn --schemas path/to/schemas
"""

import argparse
import csv
import filecmp
import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema
import numpy as np

BIN = None
SCHEMAS = None


def schema(name):
    with open(os.path.join(SCHEMAS, name + ".schema.json")) as f:
        return json.load(f)


def run(*args, cwd=None):
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def write_csv(path, rows, header):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = cls.tmp.name
        rng = np.random.default_rng(4)
        train = rng.normal(size=(80, 3))
        test = rng.normal(size=(4, 3))
        test[0] += 5.0
        test[1] = train[:, :].mean(axis=0)
        cls.train = os.path.join(cls.dir, "train.csv")
        cls.test = os.path.join(cls.dir, "test.csv")
        write_csv(cls.train, train.tolist(), ["a", "b", "c"])
        write_csv(cls.test, test.tolist(), ["a", "b", "c"])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def ok_json(self, proc, name):
        self.assertEqual(proc.returncode, 0, proc.stderr)
        out = json.loads(proc.stdout)
        jsonschema.validate(out, schema(name))
        return out

    def error(self, proc, code, kind):
        self.assertEqual(proc.returncode, code, proc.stdout + proc.stderr)
        self.assertEqual(proc.stdout, "")
        err = json.loads(proc.stderr.strip().splitlines()[-1])
        jsonschema.validate(err, schema("error"))
        self.assertEqual(err["error"]["kind"], kind)

    def test_detect_report(self):
        out = self.ok_json(run("detect", "--train", self.train, "--test", self.test, "--methods", "all",
                               "--k-candidates", "1,2,5"), "detect")
        insts = out["instances"]
        self.assertEqual(len(insts), 4)
        self.assertEqual(insts[0]["verdict"], "anomaly")
        self.assertEqual(insts[1]["verdict"], "not-a-candidate")
        self.assertNotIn("p_values", insts[1])
        for inst in insts:
            if inst["selected"]:
                p = inst["p_values"]
                self.assertEqual(inst["verdict"] == "anomaly", p["stat"] <= out["config"]["alpha"])
                self.assertGreaterEqual(p["bonferroni"], p["naive"])

    def test_detect_verdict_threshold(self):
        out = self.ok_json(run("detect", "--train", self.train, "--test", self.test, "--alpha", "0.999999"), "detect")
        for inst in out["instances"]:
            if inst["selected"]:
                self.assertEqual(inst["verdict"], "anomaly" if inst["p_values"]["stat"] <= 0.999999 else "normal")

    def test_detect_fixed_theta_and_image_statistic(self):
        out = self.ok_json(run("detect", "--train", self.train, "--test", self.test, "--theta", "-10",
                               "--statistic", "image-mean", "--k", "3"), "detect")
        self.assertTrue(all(i["selected"] for i in out["instances"]))
        self.assertIsNone(out["config"]["theta_quantile"])
        for i in out["instances"]:
            self.assertNotIn("SE3Sign", i["n_inequalities"])
            self.assertEqual(i["truncation"][0][0] >= 0, True)

    def test_detect_with_network(self):
        net = os.path.join(self.dir, "net.json")
        summary = self.ok_json(run("net-gen", "--input-dim", 3, "--hidden", "6,5", "--latent-dim", 2,
                                   "--pool-window", 2, "--seed", 5, "--out", net), "netgen")
        self.assertEqual(summary["output_dim"], 2)
        with open(net) as f:
            jsonschema.validate(json.load(f), schema("plnet"))
        out = self.ok_json(run("detect", "--train", self.train, "--test", self.test, "--net", net, "--theta", "-10"),
                           "detect")
        self.assertTrue(out["config"]["latent"])
        self.assertTrue(any("DNNPolytope" in i["n_inequalities"] for i in out["instances"]))

    def test_net_gen_stdout(self):
        self.ok_json(run("net-gen", "--input-dim", 4, "--hidden", 8, "--latent-dim", 3), "plnet")

    def test_theta(self):
        a = self.ok_json(run("theta", "--train", self.train, "--theta-quantile", 0.5), "theta")
        b = self.ok_json(run("theta", "--train", self.train, "--theta-quantile", 0.9), "theta")
        self.assertLessEqual(a["theta"], b["theta"])

    def test_malformed_csv(self):
        bad = os.path.join(self.dir, "bad.csv")
        with open(bad, "w") as f:
            f.write("a,b,c\n1,2,3\n4,oops,6\n7,8,9\n")
        self.error(run("detect", "--train", bad, "--test", self.test), 3, "data")
        ragged = os.path.join(self.dir, "ragged.csv")
        with open(ragged, "w") as f:
            f.write("a,b,c\n1,2,3\n4,5\n")
        self.error(run("detect", "--train", ragged, "--test", self.test), 3, "data")
        self.error(run("detect", "--train", os.path.join(self.dir, "missing.csv"), "--test", self.test), 3, "data")

    def test_config_errors(self):
        self.error(run("detect", "--train", self.train, "--test", self.test, "--alpha", "1.5"), 2, "config")
        self.error(run("detect", "--train", self.train, "--test", self.test, "--metric", "l1"), 2, "config")
        self.error(run("detect", "--train", self.train, "--test", self.test, "--statistic", "median"), 2, "config")
        self.error(run("detect", "--train", self.train, "--test", self.test, "--k-candidates", "5,2"), 2, "config")
        self.error(run("detect", "--train", self.train), 2, "config")
        self.error(run("experiment", "--out-dir", self.dir, "--mode", "sideways"), 2, "config")
        self.error(run("experiment", "--out-dir", self.dir, "--methods", "stat,magic"), 2, "config")
        self.error(run("bogus"), 2, "config")

    def test_sweep_n_two_rows_and_determinism(self):
        outs = []
        for tag in ("a", "b"):
            d = os.path.join(self.dir, "sweep_" + tag)
            out = self.ok_json(run("experiment", "--mode", "null", "--sweep", "n", "--values", "100,200",
                                   "--trials", 400, "--seed", 7, "--out-dir", d), "experiment")
            with open(os.path.join(d, "results.json")) as f:
                jsonschema.validate(json.load(f), schema("experiment"))
            outs.append((d, out))
        d0, out0 = outs[0]
        with open(os.path.join(d0, "plot.csv")) as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 2)
        self.assertEqual([r["n"] for r in rows], ["100", "200"])
        for name in ("plot.csv", "trials.csv"):
            self.assertTrue(filecmp.cmp(os.path.join(d0, name), os.path.join(outs[1][0], name), shallow=False))
        self.assertEqual(out0["runs"], outs[1][1]["runs"])
        for r in out0["runs"]:
            for m in r["methods"].values():
                self.assertLessEqual(m["rejections"], m["screened"])
                self.assertLessEqual(m["screened"], r["trials_run"])

    def test_serial_matches_parallel(self):
        a = os.path.join(self.dir, "ser")
        b = os.path.join(self.dir, "par")
        self.ok_json(run("experiment", "--trials", 300, "--seed", 2, "--out-dir", a, "--serial"), "experiment")
        self.ok_json(run("experiment", "--trials", 300, "--seed", 2, "--out-dir", b), "experiment")
        self.assertTrue(filecmp.cmp(os.path.join(a, "trials.csv"), os.path.join(b, "trials.csv"), shallow=False))

    def test_power_delta_sweep(self):
        d = os.path.join(self.dir, "power")
        out = self.ok_json(run("experiment", "--mode", "power", "--sweep", "delta", "--values", "1,2,5,10",
                               "--target-screened", 100, "--trials", 5000, "--methods", "stat,wopp,bonferroni",
                               "--out-dir", d), "experiment")
        with open(os.path.join(d, "plot.csv")) as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([r["delta"] for r in rows], ["1", "2", "5", "10"])
        self.assertGreaterEqual(float(rows[3]["stat"]), float(rows[0]["stat"]))
        self.assertEqual(len(out["runs"]), 4)

    def test_sweep_k_and_d(self):
        d = os.path.join(self.dir, "sk")
        self.ok_json(run("experiment", "--sweep", "k", "--values", "1,3", "--trials", 200, "--out-dir", d),
                     "experiment")
        self.ok_json(run("experiment", "--sweep", "d", "--values", "1,4", "--trials", 200, "--out-dir", d),
                     "experiment")

    def test_tabular_and_image_pipelines(self):
        d = os.path.join(self.dir, "tab")
        out = self.ok_json(run("experiment", "--pipeline", "tabular", "--data", self.train, "--n", 40,
                               "--trials", 100, "--out-dir", d), "experiment")
        self.assertEqual(out["runs"][0]["spec"]["d"], 3)
        out = self.ok_json(run("experiment", "--pipeline", "image", "--statistic", "image-mean", "--n", 50,
                               "--trials", 100, "--patch", 3, "--out-dir", d), "experiment")
        self.assertEqual(out["runs"][0]["spec"]["d"], 9)

    def test_config_file_and_flag_precedence(self):
        cfg = os.path.join(self.dir, "run.toml")
        with open(cfg, "w") as f:
            f.write("[experiment]\ntrials = 150\nseed = 11\nalpha = 0.1\nmethods = \"stat,naive\"\n")
        d = os.path.join(self.dir, "cfg")
        out = self.ok_json(run("--config", cfg, "experiment", "--out-dir", d), "experiment")
        self.assertEqual(out["runs"][0]["trials_run"], 150)
        self.assertEqual(out["alpha"], 0.1)
        self.assertEqual(set(out["runs"][0]["methods"]), {"stat", "naive"})
        out = self.ok_json(run("--config", cfg, "experiment", "--out-dir", d, "--trials", 120), "experiment")
        self.assertEqual(out["runs"][0]["trials_run"], 120)
        self.assertEqual(out["seed"], 11)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--bin", required=True)
    parser.add_argument("--schemas", required=True)
    args, rest = parser.parse_known_args()
    BIN = os.path.abspath(args.bin)
    SCHEMAS = os.path.abspath(args.schemas)
    unittest.main(argv=[sys.argv[0], *rest], verbosity=2)
