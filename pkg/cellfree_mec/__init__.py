# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Joint uplink-power and edge-compute allocation for MEC-enabled cell-free massive MIMO.

The package simulates cell-free and cellular massive MIMO deployments, allocates
uplink powers and remote computational rates by successive convex approximation,
and runs Monte Carlo campaigns comparing the two architectures.
"""

__version__ = "1.0.0"
