"""Executable entry point for the deflatecrb MCP tool server."""
from __future__ import annotations

import asyncio
from typing import Any, Callable, Dict, List, Mapping

from deflatecrb.bounds import asymptotic_bounds
from deflatecrb.errors import DeflateCRBError
from deflatecrb.harness import dump_json
from deflatecrb.model import AsymptoticRatios
from deflatecrb.rmt import MPLaw, lemma1_limits, mp_summary

try:
    from mcp.server import Server
    from mcp.server.stdio import stdio_server
    from mcp.types import TextContent, Tool
except ImportError:  # pragma: no cover - mcp not installed
    Server = None  # type: ignore[assignment]
    stdio_server = None  # type: ignore[assignment]
    TextContent = None  # type: ignore[assignment]
    Tool = None  # type: ignore[assignment]


def _number(arguments: Mapping[str, Any], key: str, default: float | None = None) -> float:
    if key not in arguments:
        if default is None:
            raise KeyError(f"missing argument: {key}")
        return default
    value = arguments[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"argument {key} must be a number, got {value!r}")
    return float(value)


def _ratios(arguments: Mapping[str, Any]) -> AsymptoticRatios:
    return AsymptoticRatios(rho=_number(arguments, "rho"), c=_number(arguments, "c", 0.0))


def _ecrb_asymptotic(arguments: Mapping[str, Any]) -> Dict[str, Any]:
    ratios = _ratios(arguments)
    payload = asymptotic_bounds(
        ratios,
        _number(arguments, "snr_db"),
        sigma_alpha2=_number(arguments, "sigma_alpha2", 1.0),
        sigma_beta2=_number(arguments, "sigma_beta2", 1.0),
    )
    payload.update(rho=ratios.rho, c=ratios.c, rho_tilde=ratios.rho_tilde, rho_bar=ratios.rho_bar)
    return payload


def _marchenko_pastur(arguments: Mapping[str, Any]) -> Dict[str, Any]:
    law = MPLaw(_number(arguments, "rho_tilde"))
    return mp_summary(
        law,
        grid=int(_number(arguments, "grid", 11)),
        moments_up_to=int(_number(arguments, "moments_up_to", 4)),
    )


def _lemma1_limits(arguments: Mapping[str, Any]) -> Dict[str, Any]:
    ratios = _ratios(arguments)
    inverse_trace, trace = lemma1_limits(ratios)
    return {"rho": ratios.rho, "c": ratios.c, "inverse_trace_limit": inverse_trace, "trace_limit": trace}


_TOOLS: Dict[str, tuple[str, Callable[[Mapping[str, Any]], Dict[str, Any]], Dict[str, Any]]] = {
    "ecrb_asymptotic": (
        "Closed-form deflated, joint and interference-free ECRBs for rho = N/L_A, c = L_B/L_A and a target SNR",
        _ecrb_asymptotic,
        {
            "type": "object",
            "properties": {
                "rho": {"type": "number"},
                "c": {"type": "number"},
                "snr_db": {"type": "number"},
                "sigma_alpha2": {"type": "number"},
                "sigma_beta2": {"type": "number"},
            },
            "required": ["rho", "snr_db"],
        },
    ),
    "marchenko_pastur": (
        "Edges, density table, moments and S(0) of the Marchenko-Pastur law of ratio rho_tilde",
        _marchenko_pastur,
        {
            "type": "object",
            "properties": {
                "rho_tilde": {"type": "number"},
                "grid": {"type": "integer"},
                "moments_up_to": {"type": "integer"},
            },
            "required": ["rho_tilde"],
        },
    ),
    "lemma1_limits": (
        "Almost-sure limits of (1/L_A) Tr{(F^T F)^-1} and (1/(N - L_B)) Tr{F^T F}",
        _lemma1_limits,
        {
            "type": "object",
            "properties": {"rho": {"type": "number"}, "c": {"type": "number"}},
            "required": ["rho"],
        },
    ),
}


def build_tool_descriptions() -> List[Dict[str, Any]]:
    """Return metadata describing each available tool."""

    return [
        {"name": name, "description": description, "input_schema": schema}
        for name, (description, _, schema) in _TOOLS.items()
    ]


def dispatch_tool(name: str, arguments: Mapping[str, Any] | None = None) -> Dict[str, Any]:
    """Run a tool by name; errors come back as ``{"error": message}``."""

    try:
        _, handler, _ = _TOOLS[name]
    except KeyError as exc:
        raise KeyError(f"Unknown tool: {name}") from exc
    try:
        return handler(dict(arguments or {}))
    except (DeflateCRBError, KeyError, ValueError) as exc:
        return {"error": str(exc)}


def _format_payload(payload: Dict[str, Any]) -> str:
    return dump_json(payload)


async def list_tools() -> List[Tool]:
    """MCP ``tools/list`` handler."""

    return [
        Tool(name=item["name"], description=item["description"], inputSchema=item["input_schema"])
        for item in build_tool_descriptions()
    ]


async def call_tool(name: str, arguments: Dict[str, Any] | None = None) -> List[TextContent]:
    """MCP ``tools/call`` handler; failures are reported as an ``error`` payload."""

    try:
        payload = dispatch_tool(name, arguments)
    except KeyError as exc:
        payload = {"error": str(exc.args[0]) if exc.args else str(exc)}
    return [TextContent(type="text", text=_format_payload(payload))]


def build_server() -> "Server":
    """Create the MCP server with the tool handlers registered."""

    if Server is None or stdio_server is None:
        raise RuntimeError(
            "The 'mcp' package is required to run the server. Install the project dependencies."
        )
    server = Server("deflatecrb")
    server.list_tools()(list_tools)
    server.call_tool()(call_tool)
    return server


async def _run_async() -> None:
    """Serve the tools over the stdio transport until the client disconnects."""

    server = build_server()
    async with stdio_server() as (read_stream, write_stream):
        await server.run(read_stream, write_stream, server.create_initialization_options())


def run() -> None:
    """Synchronous wrapper that launches the asyncio MCP server."""

    asyncio.run(_run_async())


if __name__ == "__main__":  # pragma: no cover - manual invocation
    run()
