import copy

import numpy as np
import pytest
import yaml

from netisac import Outcome
from netisac.cli import (
    CSV_COLUMNS,
    EXIT_INFEASIBLE,
    EXIT_SCHEMA,
    EXIT_SUCCESS,
    THREE_TX_TEMPLATE,
    TWO_TX_TEMPLATE,
    ScenarioError,
    SweepPlan,
    emit_scenario_templates,
    load_scenario,
    main,
    parse_scenario,
    run_solve,
    run_sweep,
)


def two_tx_document():
    return yaml.safe_load(TWO_TX_TEMPLATE)


def explicit_document(gamma_db=10.0):
    """Two unit-gain transmitters with full mutual interference: infeasible
    for any SINR floor above 0 dB."""
    return {
        "scene": {
            "transmitters": [[-50.0, 0.0], [0.0, 50.0]],
            "cu_receivers": [[-20.0, 0.0], [20.0, 0.0]],
            "sensing_receivers": [[-50.0, -10.0]],
            "target": [30.0, 0.0],
        },
        "channel": {"explicit": {
            "comm": {"h_real": [[1.0, 1.0], [1.0, 1.0]],
                     "h_imag": [[0.0, 0.0], [0.0, 0.0]],
                     "noise_power_w": [1.0, 1.0]},
            "radar": {"h_real": [[1.0, 1.0]], "h_imag": [[0.0, 0.0]],
                      "noise_level_w": 1e-15, "eff_bandwidth_hz": 1e6,
                      "obs_duration_s": 1e-3},
        }},
        "spec": {"gamma_db": gamma_db, "tau_m2": 1e6},
        "solver": {},
    }


class TestParseScenario:
    def test_template_round_trip(self):
        scenario = parse_scenario(two_tx_document())
        assert scenario.scene.target.x == 30.0
        assert scenario.scene.target.y == 0.0
        assert scenario.channel_cfg is not None
        assert scenario.explicit is None
        np.testing.assert_allclose(scenario.spec.sinr_thresholds, [10.0, 10.0])
        assert scenario.spec.crlb_ceiling == 0.05

    def test_three_tx_template(self):
        scenario = parse_scenario(yaml.safe_load(THREE_TX_TEMPLATE))
        assert scenario.scene.num_transmitters == 3
        assert (scenario.scene.target.x, scenario.scene.target.y) == (0.0, 50.0)

    def test_explicit_channels(self):
        scenario = parse_scenario(explicit_document())
        assert scenario.channel_cfg is None
        assert scenario.explicit is not None

    def test_missing_spec_named_in_error(self):
        doc = two_tx_document()
        del doc["spec"]
        with pytest.raises(ScenarioError, match="spec"):
            parse_scenario(doc)

    def test_missing_target_named_in_error(self):
        doc = two_tx_document()
        del doc["scene"]["target"]
        with pytest.raises(ScenarioError, match="target"):
            parse_scenario(doc)

    def test_both_channel_blocks_rejected(self):
        doc = two_tx_document()
        doc["channel"]["explicit"] = explicit_document()["channel"]["explicit"]
        with pytest.raises(ScenarioError, match="exactly one"):
            parse_scenario(doc)

    def test_neither_channel_block_rejected(self):
        doc = two_tx_document()
        doc["channel"] = {}
        with pytest.raises(ScenarioError, match="exactly one"):
            parse_scenario(doc)

    def test_unknown_generate_field_rejected(self):
        doc = two_tx_document()
        doc["channel"]["generate"]["bandwith_hz"] = 1e6
        with pytest.raises(ScenarioError, match="bandwith_hz"):
            parse_scenario(doc)

    def test_unknown_solver_field_rejected(self):
        doc = two_tx_document()
        doc["solver"] = {"randomisation_count": 10}
        with pytest.raises(ScenarioError, match="randomisation_count"):
            parse_scenario(doc)

    def test_gamma_length_mismatch_rejected(self):
        doc = two_tx_document()
        doc["spec"]["gamma_db"] = [10.0, 10.0, 10.0]
        with pytest.raises(ScenarioError, match="gamma_db"):
            parse_scenario(doc)

    def test_explicit_reseed_rejected(self):
        scenario = parse_scenario(explicit_document())
        with pytest.raises(ScenarioError):
            scenario.instance(seed=3)

    def test_override_builds_modified_instance(self):
        scenario = parse_scenario(two_tx_document())
        inst = scenario.instance(gamma_db=0.0, crlb_ceiling=0.5)
        np.testing.assert_allclose(inst.spec.sinr_thresholds, [1.0, 1.0])
        assert inst.spec.crlb_ceiling == 0.5


class TestSweepPlan:
    def test_values_inclusive_of_stop(self):
        plan = SweepPlan(parameter="sinr_db", start=-5.0, stop=20.0, step=2.5,
                         methods=("separate",))
        np.testing.assert_allclose(plan.values, np.arange(-5.0, 20.01, 2.5))

    @pytest.mark.parametrize("kwargs", [
        dict(parameter="bandwidth", start=0, stop=1, step=1, methods=("sdr",)),
        dict(parameter="sinr_db", start=0, stop=1, step=0, methods=("sdr",)),
        dict(parameter="sinr_db", start=2, stop=1, step=1, methods=("sdr",)),
        dict(parameter="sinr_db", start=0, stop=1, step=1, methods=()),
        dict(parameter="sinr_db", start=0, stop=1, step=1, methods=("simplex",)),
        dict(parameter="sinr_db", start=0, stop=1, step=1, methods=("sdr",),
             trials=0),
    ])
    def test_invalid_plans_rejected(self, kwargs):
        with pytest.raises(ScenarioError):
            SweepPlan(**kwargs)


class TestRunSolve:
    def test_template_scenario_solves(self):
        scenario = parse_scenario(two_tx_document())
        result, report, code = run_solve(scenario, "separate")
        assert code == EXIT_SUCCESS
        assert result.ok
        assert "total power" in report
        assert "CRLB" in report

    def test_infeasible_scenario_exit_code(self):
        scenario = parse_scenario(explicit_document(gamma_db=10.0))
        result, report, code = run_solve(scenario, "sdr")
        assert code == EXIT_INFEASIBLE
        assert result.outcome is Outcome.INFEASIBLE
        assert "infeasible" in report

    def test_unknown_method_rejected(self):
        with pytest.raises(ScenarioError, match="simplex"):
            run_solve(parse_scenario(two_tx_document()), "simplex")


class TestRunSweep:
    def plan(self, trials=2):
        return SweepPlan(parameter="sinr_db", start=0.0, stop=5.0, step=5.0,
                         methods=("separate",), trials=trials, base_seed=0)

    def test_row_arithmetic_and_header(self):
        csv_text, powers = run_sweep(two_tx_document(), self.plan())
        lines = csv_text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        # 2 sweep points x 1 method x 2 trials + mean/std per (point, method)
        assert len(lines) == 1 + 2 * 1 * 2 + 2 * 1 * 2
        assert sum(line.endswith(",summary,0") for line in lines) == 4
        assert len(powers) == 4
        assert all(p.shape == (2,) for p in powers)

    def test_serial_parallel_byte_identical(self):
        doc = two_tx_document()
        serial, p_serial = run_sweep(doc, self.plan())
        parallel, p_parallel = run_sweep(doc, self.plan(), parallel=True,
                                         workers=2)
        assert serial == parallel
        for a, b in zip(p_serial, p_parallel):
            np.testing.assert_array_equal(a, b)

    def test_document_not_mutated(self):
        doc = two_tx_document()
        snapshot = copy.deepcopy(doc)
        run_sweep(doc, self.plan())
        assert doc == snapshot

    def test_schema_error_raised_before_solving(self):
        doc = two_tx_document()
        del doc["spec"]
        with pytest.raises(ScenarioError):
            run_sweep(doc, self.plan())


class TestTemplatesAndMain:
    def test_emission_byte_identical(self, tmp_path):
        first = emit_scenario_templates(tmp_path)
        before = {p.name: p.read_bytes() for p in first}
        second = emit_scenario_templates(tmp_path)
        after = {p.name: p.read_bytes() for p in second}
        assert before == after
        assert set(before) == {"two_tx.yaml", "three_tx.yaml"}

    def test_templates_parse_as_scenarios(self, tmp_path):
        for path in emit_scenario_templates(tmp_path):
            load_scenario(path)

    def test_main_templates_then_feasibility(self, tmp_path, capsys):
        assert main(["templates", "--output-dir", str(tmp_path)]) == EXIT_SUCCESS
        assert main(["feasibility", str(tmp_path / "two_tx.yaml")]) == EXIT_SUCCESS
        assert capsys.readouterr().out.strip() == "feasible"

    def test_main_solve_separate(self, tmp_path, capsys):
        emit_scenario_templates(tmp_path)
        code = main(["solve", str(tmp_path / "two_tx.yaml"),
                     "--method", "separate"])
        assert code == EXIT_SUCCESS
        assert "status: success" in capsys.readouterr().out

    def test_main_missing_file_schema_exit(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.yaml")]) == EXIT_SCHEMA

    def test_main_malformed_scenario_schema_exit(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("scene: {}\nchannel: {}\nspec: {}\n")
        assert main(["solve", str(path)]) == EXIT_SCHEMA
