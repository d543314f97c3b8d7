"""Statistical-arbitrage portfolios from reconciled pairwise preferences."""
