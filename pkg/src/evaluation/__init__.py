# Performance evaluation against ground truth
