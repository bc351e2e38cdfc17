"""Pay-ratio and critical audit matter extraction from SEC filings.

Regex windowing narrows each filing to a few candidate passages, a chat
completions model (or the bundled offline stand-in) turns those passages into
JSON, and the validation module checks the result for internal consistency.
"""

__version__ = "0.1.0"
