import asyncio
import json

import pytest

from server import build_tool_descriptions, dispatch_tool


def test_tool_descriptions_cover_every_tool():
    tools = {tool["name"]: tool for tool in build_tool_descriptions()}
    assert set(tools) == {"ecrb_asymptotic", "marchenko_pastur", "lemma1_limits"}
    assert tools["ecrb_asymptotic"]["input_schema"]["required"] == ["rho", "snr_db"]
    assert all(tool["description"] for tool in tools.values())


def test_ecrb_asymptotic_tool():
    payload = dispatch_tool("ecrb_asymptotic", {"rho": 10, "c": 1, "snr_db": 10})
    assert payload["c_deflated_inf"] == pytest.approx(0.0125)
    assert payload["c_ideal_inf"] == pytest.approx(1.0 / 90.0)
    assert payload["rho_tilde"] == pytest.approx(9.0)


def test_marchenko_pastur_tool():
    payload = dispatch_tool("marchenko_pastur", {"rho_tilde": 9.0, "moments_up_to": 2})
    assert payload["lambda_plus"] == pytest.approx(16.0)
    assert payload["moments"] == pytest.approx([9.0, 90.0])


def test_lemma1_limits_tool():
    payload = dispatch_tool("lemma1_limits", {"rho": 10.0, "c": 1.0})
    assert payload["inverse_trace_limit"] == pytest.approx(1.25)
    assert payload["trace_limit"] == pytest.approx(0.1)


@pytest.mark.parametrize(
    "name,arguments",
    [
        ("ecrb_asymptotic", {"snr_db": 10}),
        ("ecrb_asymptotic", {"rho": "ten", "snr_db": 10}),
        ("ecrb_asymptotic", {"rho": 2.0, "c": 1.0, "snr_db": 10}),
        ("marchenko_pastur", {"rho_tilde": -1.0}),
        ("lemma1_limits", {"rho": 1.0}),
    ],
)
def test_tool_errors_are_returned(name, arguments):
    assert "error" in dispatch_tool(name, arguments)


def test_unknown_tool():
    with pytest.raises(KeyError):
        dispatch_tool("ecrb_finite")


def test_list_tools_handler_returns_mcp_tools():
    types = pytest.importorskip("mcp.types")
    from server import list_tools

    tools = asyncio.run(list_tools())
    assert all(isinstance(tool, types.Tool) for tool in tools)
    assert {tool.name for tool in tools} == {"ecrb_asymptotic", "marchenko_pastur", "lemma1_limits"}


def test_call_tool_handler_returns_text_content():
    types = pytest.importorskip("mcp.types")
    from server import call_tool

    content = asyncio.run(call_tool("lemma1_limits", {"rho": 10.0, "c": 1.0}))
    assert len(content) == 1
    assert isinstance(content[0], types.TextContent)
    assert json.loads(content[0].text)["inverse_trace_limit"] == pytest.approx(1.25)


def test_call_tool_handler_reports_unknown_tool_as_error():
    pytest.importorskip("mcp.types")
    from server import call_tool

    content = asyncio.run(call_tool("ecrb_finite", {}))
    assert json.loads(content[0].text) == {"error": "Unknown tool: ecrb_finite"}


def test_build_server_registers_both_handlers():
    types = pytest.importorskip("mcp.types")
    from server import build_server

    handlers = build_server().request_handlers
    assert types.ListToolsRequest in handlers
    assert types.CallToolRequest in handlers


def test_run_serves_over_stdio(monkeypatch):
    pytest.importorskip("mcp")
    import server

    calls = []

    class FakeTransport:
        async def __aenter__(self):
            return "read", "write"

        async def __aexit__(self, *exc_info):
            return False

    async def fake_run(self, read_stream, write_stream, options):
        calls.append((read_stream, write_stream, options))

    monkeypatch.setattr(server, "stdio_server", lambda: FakeTransport())
    monkeypatch.setattr(server.Server, "run", fake_run)
    server.run()
    assert len(calls) == 1
    assert calls[0][:2] == ("read", "write")
    assert calls[0][2].server_name == "deflatecrb"
