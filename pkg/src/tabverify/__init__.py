"""Two-party verification of secret table-graph designs.

A developer holds a secret design expressed as a graph of tabular
expressions. A verifier tests it against a public specification while
learning only the interconnection structure, and every run emits a
certificate any third party can replay.
"""

__version__ = "0.1.0"
