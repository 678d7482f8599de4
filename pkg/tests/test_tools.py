"""Tests for the MCP tools."""

import json

import numpy as np

import ggmc.server  # noqa: F401
from ggmc.models import GraphComplexityInput, OracleRunInput, Pi0EstimateInput, ResponseFormat
from ggmc.tools.estimate import ggmc_estimate_graph_complexity, ggmc_estimate_pi0
from ggmc.tools.oracle import ggmc_run_oracles


def uniform_list(N: int, seed: int = 1) -> list:
    return np.random.default_rng(seed).uniform(size=N).tolist()


class TestEstimatePi0:
    async def test_json(self) -> None:
        result = await ggmc_estimate_pi0(Pi0EstimateInput(pvalues=uniform_list(500), B=20))
        doc = json.loads(result)
        assert doc["success"] is True
        assert doc["data"]["N"] == 500
        methods = [row["method"] for row in doc["data"]["estimates"]]
        assert methods == ["Smoother", "Bootstrap"]
        for row in doc["data"]["estimates"]:
            assert abs(row["pi0_hat"] + row["pi1_hat"] - 1.0) < 1e-12

    async def test_fixed_lambda_row(self) -> None:
        params = Pi0EstimateInput(pvalues=[0.1, 0.3, 0.5, 0.7, 0.9], method="smoother", lambda_value=0.5)
        doc = json.loads(await ggmc_estimate_pi0(params))
        rows = {row["method"]: row for row in doc["data"]["estimates"]}
        assert set(rows) == {"Smoother", "FixedLambda"}
        assert abs(rows["FixedLambda"]["pi0_hat"] - 0.8) < 1e-12
        assert rows["FixedLambda"]["selected_lambda"] == 0.5

    async def test_invalid_pvalues(self) -> None:
        result = await ggmc_estimate_pi0(Pi0EstimateInput(pvalues=[0.2, 1.7]))
        assert result.startswith("Error:")

    async def test_markdown(self) -> None:
        params = Pi0EstimateInput(pvalues=uniform_list(200), method="smoother",
                                  response_format=ResponseFormat.MARKDOWN)
        result = await ggmc_estimate_pi0(params)
        assert result.startswith("## pi0 estimates (N = 200)")
        assert "| method |" in result


class TestGraphComplexity:
    async def test_block_data(self, block_csv) -> None:
        params = GraphComplexityInput(input_path=str(block_csv), method="GFC_L")
        doc = json.loads(await ggmc_estimate_graph_complexity(params))
        assert doc["success"] is True
        data = doc["data"]
        assert data["k"] == 20
        assert data["pairs"] == 190
        assert data["method"] == "GFC_L"
        assert 0.0 <= data["pi0_smoother"] <= 1.0
        assert abs(data["pi0_bootstrap"] + data["pi1_bootstrap"] - 1.0) < 1e-12

    async def test_markdown(self, block_csv) -> None:
        params = GraphComplexityInput(input_path=str(block_csv), response_format="markdown")
        result = await ggmc_estimate_graph_complexity(params)
        assert result.startswith("# Graph complexity")

    async def test_missing_file(self, tmp_path) -> None:
        params = GraphComplexityInput(input_path=str(tmp_path / "absent.csv"))
        result = await ggmc_estimate_graph_complexity(params)
        assert result.startswith("Error:")


class TestRunOracles:
    async def test_markdown(self) -> None:
        params = OracleRunInput(mc_reps=10_000, response_format=ResponseFormat.MARKDOWN)
        result = await ggmc_run_oracles(params)
        assert "all passed" in result
        assert "mehler_series" in result

    async def test_json(self) -> None:
        doc = json.loads(await ggmc_run_oracles(OracleRunInput(mc_reps=10_000)))
        assert doc["success"] is True
        assert doc["data"]["schema"] == 1
        assert all(check["passed"] for check in doc["data"]["checks"])
