//! Arrow-key technique menu.

use std::io::{self, IsTerminal, Write};

use crossterm::cursor::MoveTo;
use crossterm::event::{self, Event, KeyCode, KeyEventKind};
use crossterm::style::{Attribute, Print, SetAttribute};
use crossterm::terminal::{self, Clear, ClearType};
use crossterm::{execute, queue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technique {
    Generate = 1,
    Split = 2,
    Merge = 3,
    Scores = 4,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Generate,
        Technique::Split,
        Technique::Merge,
        Technique::Scores,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            Technique::Generate => "Generate personalised exams",
            Technique::Split => "Split scanned exams per student",
            Technique::Merge => "Merge pages for correction or review",
            Technique::Scores => "Collect scores and plot grades",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MenuAction {
    Stay,
    Run(Technique),
    Exit,
}

/// Menu state: the highlighted row. Keys map to actions without touching
/// the terminal, so the logic is testable.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Menu {
    pub selected: usize,
}

impl Menu {
    pub fn handle(&mut self, key: KeyCode) -> MenuAction {
        let n = Technique::ALL.len();
        match key {
            KeyCode::Up => {
                self.selected = (self.selected + n - 1) % n;
                MenuAction::Stay
            }
            KeyCode::Down => {
                self.selected = (self.selected + 1) % n;
                MenuAction::Stay
            }
            KeyCode::Home => {
                self.selected = 0;
                MenuAction::Stay
            }
            KeyCode::End => {
                self.selected = n - 1;
                MenuAction::Stay
            }
            KeyCode::Char(c @ '1'..='4') => {
                self.selected = (c as u8 - b'1') as usize;
                MenuAction::Stay
            }
            KeyCode::Enter => MenuAction::Run(Technique::ALL[self.selected]),
            KeyCode::Esc | KeyCode::Char('q') => MenuAction::Exit,
            _ => MenuAction::Stay,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        Technique::ALL
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mark = if i == self.selected { ">" } else { " " };
                format!("{mark} {}. {}", t.id(), t.label())
            })
            .collect()
    }
}

#[derive(Debug)]
pub struct NotATerminal;

impl std::fmt::Display for NotATerminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "the menu needs an interactive terminal; use the subcommands generate, split, merge or scores instead (see --help)"
        )
    }
}

impl std::error::Error for NotATerminal {}

fn draw(out: &mut impl Write, menu: &Menu) -> io::Result<()> {
    queue!(out, Clear(ClearType::All), MoveTo(0, 0), Print("examflow: select a technique"))?;
    for (row, line) in menu.lines().iter().enumerate() {
        queue!(out, MoveTo(0, row as u16 + 2))?;
        if row == menu.selected {
            queue!(out, SetAttribute(Attribute::Reverse), Print(line), SetAttribute(Attribute::Reset))?;
        } else {
            queue!(out, Print(line))?;
        }
    }
    queue!(
        out,
        MoveTo(0, Technique::ALL.len() as u16 + 3),
        Print("arrow keys move, Enter runs, Esc quits")
    )?;
    out.flush()
}

/// Shows the menu until a technique is chosen (`Some`) or the user quits
/// (`None`). The terminal is restored before returning.
pub fn choose() -> Result<Option<Technique>, Box<dyn std::error::Error>> {
    if !io::stdin().is_terminal() || !io::stdout().is_terminal() {
        return Err(Box::new(NotATerminal));
    }
    let mut out = io::stdout();
    terminal::enable_raw_mode()?;
    execute!(out, terminal::EnterAlternateScreen)?;
    let result = (|| -> io::Result<Option<Technique>> {
        let mut menu = Menu::default();
        loop {
            draw(&mut out, &menu)?;
            if let Event::Key(key) = event::read()? {
                if key.kind != KeyEventKind::Press {
                    continue;
                }
                match menu.handle(key.code) {
                    MenuAction::Stay => {}
                    MenuAction::Run(t) => return Ok(Some(t)),
                    MenuAction::Exit => return Ok(None),
                }
            }
        }
    })();
    let _ = execute!(out, terminal::LeaveAlternateScreen);
    let _ = terminal::disable_raw_mode();
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrows_wrap_and_enter_runs() {
        let mut m = Menu::default();
        assert_eq!(m.handle(KeyCode::Up), MenuAction::Stay);
        assert_eq!(m.selected, 3);
        m.handle(KeyCode::Down);
        m.handle(KeyCode::Down);
        assert_eq!(m.handle(KeyCode::Enter), MenuAction::Run(Technique::Split));
    }

    #[test]
    fn digits_select_and_escape_exits() {
        let mut m = Menu::default();
        m.handle(KeyCode::Char('3'));
        assert_eq!(m.handle(KeyCode::Enter), MenuAction::Run(Technique::Merge));
        assert_eq!(m.handle(KeyCode::Esc), MenuAction::Exit);
    }

    #[test]
    fn numbering_is_fixed() {
        let ids: Vec<u8> = Technique::ALL.iter().map(|t| t.id()).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
        assert!(Menu::default().lines()[0].starts_with("> 1. Generate"));
    }
}
