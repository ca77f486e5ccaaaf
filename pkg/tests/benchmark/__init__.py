# Benchmark package
