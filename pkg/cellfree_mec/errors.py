# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""Exception hierarchy for the cellfree_mec package."""


class CellFreeMecError(Exception):
    """Base class for all package errors"""


class ConfigurationError(CellFreeMecError, ValueError):
    """Invalid simulation, campaign or solver configuration"""


class InfeasibleProblemError(CellFreeMecError):
    """Allocation problem admits no strictly feasible point"""


class RoundingError(CellFreeMecError):
    """Integer compute rates cannot be repaired within the budgets"""


class StoreError(CellFreeMecError):
    """Results database operation failed"""
