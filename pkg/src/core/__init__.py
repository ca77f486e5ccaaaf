# Core scene types, geometry and stream containers
