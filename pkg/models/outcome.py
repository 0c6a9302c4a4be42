from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from models.certificate import DefenseSet


class Answer(str, Enum):
    """判定结果"""
    YES = "yes"
    NO = "no"

    @classmethod
    def of(cls, flag: bool) -> 'Answer':
        return cls.YES if flag else cls.NO


@dataclass
class SolveOutcome:
    """求解结果：答案 + 可选防御证书 + 统计计数"""
    answer: Answer
    defense: Optional['DefenseSet'] = None
    stats: Dict[str, int] = field(default_factory=dict)
    solver: str = ""

    @property
    def is_yes(self) -> bool:
        return self.answer == Answer.YES

    def bump(self, counter: str, amount: int = 1):
        """累加统计计数"""
        self.stats[counter] = self.stats.get(counter, 0) + amount

    def to_report(self, with_defense: bool = True, with_stats: bool = True) -> Dict[str, Any]:
        """转换为 CLI 输出的 JSON 对象"""
        report: Dict[str, Any] = {'answer': self.answer.value}
        if with_defense and self.defense is not None:
            report['defense'] = self.defense.to_json()
        if with_stats:
            report['stats'] = dict(sorted(self.stats.items()))
        return report
