"""Game-semantics query engine.

Agents hold knowledgebases of games; queries are decided by a four-rule
proof search whose proofs double as executable winning strategies; updates
propagate between agents as switch moves on sequential chains.
"""

__version__ = "0.1.0"
