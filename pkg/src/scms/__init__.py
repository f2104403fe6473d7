"""Security Credential Management System for V2X communications.

Core library (butterfly key expansion, linkage-value chains, certificates,
CRLs) plus a deterministic multi-component simulator covering device
bootstrapping, pseudonym certificate provisioning, misbehavior handling,
revocation and elector-based root management.
"""

__version__ = "0.1.0"
