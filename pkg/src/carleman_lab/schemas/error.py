from pydantic import BaseModel, Field
from typing import Optional


class ErrorReport(BaseModel):
    """Standardized error report written by the experiment runner."""

    status_code: int = Field(..., description="Process exit status")
    code: str = Field(..., description="Application-specific error code")
    message: str = Field(..., description="Human-readable error message")
    stage: Optional[str] = Field(None, description="Pipeline stage that failed")
    details: Optional[str] = Field(None, description="Additional details about the error")
