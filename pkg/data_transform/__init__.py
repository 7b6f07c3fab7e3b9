# Per-block summaries of observed experiments
