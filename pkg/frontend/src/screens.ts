// DOM builders for each phase. Everything displayed about dimensions comes
// from the API payloads; nothing rubric-related is hard-coded here.

import type {
  AssessmentItemInfo,
  GradeReportPayload,
  ScenarioInfo,
  SurveyItemInfo,
  WarmupItemInfo,
} from './types';
import { orderedVerdicts } from './state';

type Child = Node | string;

export function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function likertRow(item: SurveyItemInfo, onPick: (value: number) => void): HTMLElement {
  const options = el('div', { class: 'likert-options' });
  for (let value = 1; value <= 5; value++) {
    const input = el('input', {
      type: 'radio',
      name: `likert-${item.id}`,
      value: String(value),
      id: `likert-${item.id}-${value}`,
    }) as HTMLInputElement;
    input.addEventListener('change', () => onPick(value));
    const label = el('label', { for: `likert-${item.id}-${value}` }, [String(value)]);
    options.append(input, label);
  }
  return el('div', { class: 'likert-row', 'data-item': item.id }, [
    el('p', { class: 'stem' }, [item.stem]),
    options,
  ]);
}

export function testItemRow(
  item: AssessmentItemInfo,
  onAnswer: (value: number | boolean | string) => void,
): HTMLElement {
  const row = el('div', { class: 'test-item', 'data-item': item.id }, [
    el('p', { class: 'stem' }, [item.stem]),
  ]);
  if (item.kind === 'MCQ') {
    item.options.forEach((option, index) => {
      const input = el('input', {
        type: 'radio',
        name: `item-${item.id}`,
        id: `item-${item.id}-${index}`,
        value: String(index),
      }) as HTMLInputElement;
      input.addEventListener('change', () => onAnswer(index));
      row.append(
        el('div', { class: 'option' }, [input, el('label', { for: `item-${item.id}-${index}` }, [option])]),
      );
    });
  } else if (item.kind === 'TF') {
    for (const value of [true, false]) {
      const input = el('input', {
        type: 'radio',
        name: `item-${item.id}`,
        id: `item-${item.id}-${value}`,
        value: String(value),
      }) as HTMLInputElement;
      input.addEventListener('change', () => onAnswer(value));
      row.append(
        el('div', { class: 'option' }, [
          input,
          el('label', { for: `item-${item.id}-${value}` }, [value ? 'True' : 'False']),
        ]),
      );
    }
  } else {
    const area = el('textarea', { rows: '3', 'data-item': item.id }) as HTMLTextAreaElement;
    area.addEventListener('input', () => onAnswer(area.value));
    row.append(area);
  }
  return row;
}

export function warmupCard(
  item: WarmupItemInfo,
  onAnswer: (value: boolean | number) => void,
): HTMLElement {
  const card = el('div', { class: 'warmup-card', 'data-item': item.id }, [
    el('p', { class: 'stem' }, [item.stem]),
  ]);
  if (item.kind === 'TF') {
    for (const value of [true, false]) {
      const button = el('button', { class: 'warmup-answer' }, [value ? 'True' : 'False']);
      button.addEventListener('click', () => onAnswer(value));
      card.append(button);
    }
  } else {
    item.options.forEach((option, index) => {
      const button = el('button', { class: 'warmup-answer' }, [option]);
      button.addEventListener('click', () => onAnswer(index));
      card.append(button);
    });
  }
  card.append(el('p', { class: 'feedback', 'data-feedback': item.id }, []));
  return card;
}

export function scenarioCard(scenario: ScenarioInfo): HTMLElement {
  return el('section', { class: 'scenario-card' }, [
    el('h2', {}, [scenario.title]),
    el('p', { class: 'subject' }, [`Subject: ${scenario.subject}`]),
    el('p', { class: 'narrative' }, [scenario.narrative]),
  ]);
}

export function gradePanel(
  report: GradeReportPayload,
  dimensionOrder: string[],
  notes: Record<string, string>,
): HTMLElement {
  const panel = el('section', { class: 'grade-panel' }, [el('h3', {}, ['Prompt feedback'])]);
  for (const [dimension, verdict] of orderedVerdicts(report, dimensionOrder)) {
    panel.append(
      el('div', { class: 'grade-row', 'data-dimension': dimension }, [
        el(
          'span',
          {
            class: `badge ${verdict.pass ? 'badge-pass' : 'badge-fail'}`,
            'data-badge': dimension,
          },
          [verdict.pass ? 'PASS' : 'FAIL'],
        ),
        el('span', { class: 'dimension-name' }, [dimension]),
        el('p', { class: 'dimension-note' }, [notes[dimension] ?? '']),
        el('p', { class: 'explanation' }, [verdict.explanation]),
      ]),
    );
  }
  panel.append(
    el('p', { class: 'disclaimer' }, [
      'Note: the auto-grader may make mistakes. Treat its feedback as a suggestion.',
    ]),
  );
  return panel;
}
