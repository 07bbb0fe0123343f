"""Permissioned ledger for issuing and verifying Indonesian VAT e-invoices."""

__version__ = "0.1.0"
