"""Arithmetic expressions in ``x`` (or ``x1..xn``) compiled to vectorized oracles.

Only numbers, the coordinate names, ``pi``, ``e``, a fixed set of numpy
functions and the operators ``+ - * / ** %`` are accepted.
"""

from __future__ import annotations

import ast

import numpy as np

from .core import Oracle

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "floor": np.floor, "frac": lambda t: t - np.floor(t),
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd)


class ExpressionError(ValueError):
    pass


def _variables(dim: int) -> set[str]:
    names = {f"x{k + 1}" for k in range(dim)}
    if dim == 1:
        names.add("x")
    return names


def compile_expression(text: str, dim: int = 1, *, domain: str = "euclidean") -> Oracle:
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    allowed_names = _variables(dim) | set(CONSTANTS) | set(FUNCTIONS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExpressionError(f"{type(node).__name__} is not allowed in expressions")
        if isinstance(node, ast.Name) and node.id not in allowed_names:
            raise ExpressionError(f"unknown name {node.id!r} (dimension {dim})")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                raise ExpressionError("only calls like sin(...) to known functions are allowed")
        if isinstance(node, ast.Constant) and (isinstance(node.value, bool) or
                                               not isinstance(node.value, (int, float))):
            raise ExpressionError(f"constant {node.value!r} is not a number")
    code = compile(tree, "<expr>", "eval")

    def fn(X):
        env = {"__builtins__": {}, **CONSTANTS, **FUNCTIONS}
        for k in range(dim):
            env[f"x{k + 1}"] = X[:, k]
        if dim == 1:
            env["x"] = X[:, 0]
        out = eval(code, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (len(X),)).copy()

    return Oracle(fn, dim, domain=domain, label=text)
