# Tests for service layer modules
